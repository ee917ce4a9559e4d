use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// `[u, v] = u₀v₀ − Σ_{i≥1} uᵢvᵢ`.
pub fn minkowski_inner<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(minkowski_unchecked(u, v))
}

pub(crate) fn minkowski_unchecked<T: Scalar>(u: &[T], v: &[T]) -> T {
    let mut s = u[0] * v[0];
    for i in 1..u.len() {
        s = s - u[i] * v[i];
    }
    s
}

/// Natural parameter of a hyperboloid distribution on 𝕃^d: a vector in the open
/// forward cone `θ₀ > √(θ₁² + … + θ_d²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzParam<T> {
    pub d: usize,
    pub theta: Vec<T>,
}

impl<T: Scalar> LorentzParam<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if theta.len() < 3 {
            return Err(Error::UnsupportedDimension(theta.len().saturating_sub(1)));
        }
        let p = Self {
            d: theta.len() - 1,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let t0 = self.theta[0];
        if !(t0 > T::zero()) {
            return Err(Error::ConeViolation(format!("theta_0 > 0 violated (theta_0 = {:?})", t0)));
        }
        let scale = self.theta.iter().fold(T::zero(), |m, v| m.max_of(v.magnitude()));
        let q = self.norm_sq();
        if !(q > T::cone_slack(scale)) {
            return Err(Error::ConeViolation(format!(
                "theta_0^2 - sum theta_i^2 > 0 violated ([theta, theta] = {:?})",
                q
            )));
        }
        Ok(())
    }

    /// `[θ, θ]`.
    pub fn norm_sq(&self) -> T {
        minkowski_unchecked(&self.theta, &self.theta)
    }

    /// `[θ, θ′]`, checking dimensions.
    pub fn inner(&self, other: &Self) -> Result<T> {
        minkowski_inner(&self.theta, &other.theta)
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: other.d,
            });
        }
        Ok(())
    }

    /// `s·self + t·other` as a raw vector, which may leave the cone.
    pub fn combine(&self, s: T, other: &Self, t: T) -> Vec<T> {
        self.theta
            .iter()
            .zip(&other.theta)
            .map(|(&u, &v)| s * u + t * v)
            .collect()
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        Self::new(self.theta.iter().map(|&v| s * v).collect())
    }
}

impl<T: Real> LorentzParam<T> {
    /// `|θ| = [θ, θ]^{1/2}`.
    pub fn minkowski_norm(&self) -> T {
        self.norm_sq().sqrt()
    }
}

/// An element of SO₀(1, d) stored as a dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzTransform<T> {
    pub a: Vec<Vec<T>>,
}

impl<T: Real> LorentzTransform<T> {
    pub fn identity(d: usize) -> Self {
        let n = d + 1;
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self { a }
    }

    pub fn dim(&self) -> usize {
        self.a.len() - 1
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        self.a
            .iter()
            .map(|row| row.iter().zip(v).map(|(&r, &x)| r * x).sum())
            .collect()
    }

    pub fn compose(&self, other: &Self) -> Self {
        let n = self.a.len();
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| self.a[i][k] * other.a[k][j]).sum())
                    .collect()
            })
            .collect();
        Self { a }
    }

    /// Boost of the given rapidity in the `(x₀, x₁)` plane.
    pub fn boost(d: usize, rapidity: T) -> Self {
        let mut m = Self::identity(d);
        let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
        m.a[0][0] = ch;
        m.a[0][1] = sh;
        m.a[1][0] = sh;
        m.a[1][1] = ch;
        m
    }

    /// Embeds a spatial rotation `r` (d×d, orthogonal, det +1).
    pub fn rotation(r: &[Vec<T>]) -> Self {
        let d = r.len();
        let mut m = Self::identity(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i + 1][j + 1] = r[i][j];
            }
        }
        m
    }

    /// Acts on a parameter; the cone is preserved.
    pub fn act_param(&self, theta: &LorentzParam<T>) -> Result<LorentzParam<T>> {
        if theta.d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: theta.d,
            });
        }
        LorentzParam::new(self.apply(&theta.theta))
    }

    /// Largest deviation of `[Aeᵢ, Aeⱼ]` from `[eᵢ, eⱼ]` over basis pairs.
    pub fn isometry_defect(&self) -> T {
        let n = self.a.len();
        let col = |j: usize| -> Vec<T> { (0..n).map(|i| self.a[i][j]).collect() };
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let g = minkowski_unchecked(&col(i), &col(j));
                let target = if i != j {
                    T::zero()
                } else if i == 0 {
                    T::one()
                } else {
                    -T::one()
                };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Random element `rotation · boost · rotation` with rapidity in `[−2, 2]`.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self::random_with(d, &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let r1 = Self::rotation(&random_rotation(d, rng));
        let r2 = Self::rotation(&random_rotation(d, rng));
        let b = Self::boost(d, T::of(rng.gen_range(-2.0..2.0)));
        r1.compose(&b).compose(&r2)
    }
}

/// Random element of SO(d) by Gram–Schmidt on Gaussian columns, with the sign of
/// the last column fixed so the determinant is +1.
fn random_rotation<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Vec<T>> {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut degenerate = false;
        for _ in 0..d {
            let mut v: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
        if degenerate {
            continue;
        }
        let mut m: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect();
        if det(&m) < 0.0 {
            for row in m.iter_mut() {
                row[d - 1] = -row[d - 1];
            }
        }
        return m.into_iter().map(|r| r.into_iter().map(T::of).collect()).collect();
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    sign * (0..n).map(|i| a[i][i]).product::<f64>()
}
