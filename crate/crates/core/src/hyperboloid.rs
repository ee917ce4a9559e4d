//! The hyperboloid family on 𝕃^d.
//!
//! `P_θ(dx) = c_d(|θ|) exp(−[θ, x̃]) μ(dx)` with `μ(dx) = dx / x̃₀` the invariant
//! measure in chart coordinates, `|θ| = [θ, θ]^{1/2}` and
//! `c_d(t) = t^ν / (2 (2π)^ν K_ν(t))`, `ν = (d − 1)/2`.
//!
//! The sufficient statistic is `t(x) = (−x̃₀, x₁, …, x_d)`, paired with θ by the
//! Euclidean inner product, so `⟨θ, t(x)⟩ = −[θ, x̃]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{minkowski_unchecked, HyperboloidPoint, LorentzParam};
use crate::optim::{bisect, golden_max};
use crate::poincare::Matrix3;
use crate::scalar::{CompensatedSum, Real};
use crate::specfun::{bessel_k, bessel_k_ratio};

/// A hyperboloid distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperboloidModel<T> {
    pub theta: LorentzParam<T>,
}

impl<T: Real> HyperboloidModel<T> {
    pub fn new(theta: LorentzParam<T>) -> Self {
        Self { theta }
    }

    pub fn log_density(&self, p: &HyperboloidPoint<T>) -> Result<T> {
        log_density(&self.theta, p)
    }

    pub fn cumulant(&self) -> T {
        cumulant(&self.theta)
    }

    pub fn moments(&self) -> Vec<T> {
        grad_cumulant(&self.theta)
    }
}

fn order<T: Real>(d: usize) -> T {
    T::from_usize(d - 1).expect("small integer") / T::two()
}

/// `log c_d(t)`.
pub fn log_normalizer<T: Real>(d: usize, t: T) -> T {
    let nu: T = order(d);
    let log_k = bessel_k(nu, t).expect("cone norm is positive").log_value;
    nu * t.ln() - T::two().ln() - nu * (T::two() * T::PI()).ln() - log_k
}

/// Cumulant `F(θ) = −log c_d(|θ|)`.
pub fn cumulant<T: Real>(theta: &LorentzParam<T>) -> T {
    -log_normalizer(theta.d, theta.minkowski_norm())
}

fn check_point<T: Real>(theta: &LorentzParam<T>, p: &HyperboloidPoint<T>) -> Result<()> {
    if p.dim() != theta.d {
        return Err(Error::DimensionMismatch {
            expected: theta.d,
            actual: p.dim(),
        });
    }
    Ok(())
}

/// `log c_d(|θ|) − [θ, x̃] − ½ log(1 + Σ xᵢ²)`.
pub fn log_density<T: Real>(theta: &LorentzParam<T>, p: &HyperboloidPoint<T>) -> Result<T> {
    check_point(theta, p)?;
    Ok(log_density_with(theta, log_normalizer(theta.d, theta.minkowski_norm()), p))
}

/// [`log_density`] with a precomputed `log c_d(|θ|)`.
pub(crate) fn log_density_with<T: Real>(theta: &LorentzParam<T>, log_c: T, p: &HyperboloidPoint<T>) -> T {
    let lift = p.lift();
    log_c - minkowski_unchecked(&theta.theta, &lift) - lift[0].ln()
}

/// `F′(t) = −K_{ν+1}(t)/K_ν(t)`.
fn cumulant_slope<T: Real>(d: usize, t: T) -> T {
    -bessel_k_ratio(order::<T>(d), t).expect("cone norm is positive")
}

/// `F″(t) = (log K_ν)″(t) + ν/t²` with `(log K_ν)″ = 1 + ν²/t² − L/t − L²`, `L = K′_ν/K_ν`.
fn cumulant_curvature<T: Real>(d: usize, t: T) -> T {
    let nu: T = order(d);
    let l = nu / t + cumulant_slope(d, t);
    T::one() + nu * nu / (t * t) - l / t - l * l + nu / (t * t)
}

/// `G θ` with `G = diag(1, −1, …, −1)`.
fn flip<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().enumerate().map(|(i, &x)| if i == 0 { x } else { -x }).collect()
}

/// `η = ∇F(θ) = F′(|θ|) Gθ / |θ|`, the mean of the sufficient statistic.
pub fn grad_cumulant<T: Real>(theta: &LorentzParam<T>) -> Vec<T> {
    let t = theta.minkowski_norm();
    let k = cumulant_slope(theta.d, t) / t;
    flip(&theta.theta).into_iter().map(|g| k * g).collect()
}

/// `∇²F(θ)` for any `d`.
pub fn hessian<T: Real>(theta: &LorentzParam<T>) -> Vec<Vec<T>> {
    let t = theta.minkowski_norm();
    let f1 = cumulant_slope(theta.d, t);
    let f2 = cumulant_curvature(theta.d, t);
    let g = flip(&theta.theta);
    let n = g.len();
    let mut h = vec![vec![T::zero(); n]; n];
    let t2 = t * t;
    let t3 = t2 * t;
    for i in 0..n {
        for j in 0..n {
            let diag = if i != j {
                T::zero()
            } else if i == 0 {
                T::one()
            } else {
                -T::one()
            };
            h[i][j] = f2 * g[i] * g[j] / t2 + f1 * (diag / t - g[i] * g[j] / t3);
        }
    }
    h
}

/// Closed-form Fisher information at `d = 2`.
pub fn fim2<T: Real>(theta: &LorentzParam<T>) -> Result<Matrix3<T>> {
    if theta.d != 2 {
        return Err(Error::UnsupportedDimension(theta.d));
    }
    let t = theta.minkowski_norm();
    let (t0, t1, t2) = (theta.theta[0], theta.theta[1], theta.theta[2]);
    let k = T::two() + t;
    let base = t * t * (T::one() + t);
    let s = T::one() / (t * t * t * t);
    Ok([
        [s * (k * t0 * t0 - base), -s * k * t0 * t1, -s * k * t0 * t2],
        [-s * k * t0 * t1, s * (k * t1 * t1 + base), s * k * t1 * t2],
        [-s * k * t0 * t2, s * k * t1 * t2, s * (k * t2 * t2 + base)],
    ])
}

/// `KL(P_θ : P_θ′) = F(θ′) − F(θ) − ⟨∇F(θ), θ′ − θ⟩`.
pub fn kld<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>) -> Result<T> {
    theta.check_same_dim(theta2)?;
    let grad = grad_cumulant(theta);
    let inner: T = grad
        .iter()
        .zip(theta2.theta.iter().zip(&theta.theta))
        .map(|(&g, (&b, &a))| g * (b - a))
        .sum();
    Ok(cumulant(theta2) - cumulant(theta) - inner)
}

fn cone_norm<T: Real>(d: usize, v: Vec<T>) -> Option<T> {
    let p = LorentzParam::new(v).ok()?;
    debug_assert_eq!(p.d, d);
    Some(p.minkowski_norm())
}

/// Squared Hellinger divergence from `BC = √(c_d(|θ|) c_d(|θ′|)) / c_d(|θ + θ′|/2)`.
pub fn hellinger_sq<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>) -> Result<T> {
    theta.check_same_dim(theta2)?;
    let d = theta.d;
    let half = T::of(0.5);
    let s = cone_norm(d, theta.combine(half, theta2, half)).expect("the cone is convex");
    let log_bc = half * (log_normalizer(d, theta.minkowski_norm()) + log_normalizer(d, theta2.minkowski_norm()))
        - log_normalizer(d, s);
    Ok(-log_bc.exp_m1())
}

/// Neyman χ² `c_d(|θ′|)² / (c_d(|θ|) c_d(|2θ′ − θ|)) − 1`, or `+∞` outside the cone.
pub fn neyman_chi2<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>) -> Result<T> {
    theta.check_same_dim(theta2)?;
    let d = theta.d;
    let Some(s) = cone_norm(d, theta2.combine(T::two(), theta, -T::one())) else {
        return Ok(T::infinity());
    };
    let log_ratio = T::two() * log_normalizer(d, theta2.minkowski_norm())
        - log_normalizer(d, theta.minkowski_norm())
        - log_normalizer(d, s);
    Ok(log_ratio.exp_m1())
}

pub fn jeffreys<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>) -> Result<T> {
    Ok(kld(theta, theta2)? + kld(theta2, theta)?)
}

/// `(1−α)F(θ) + αF(θ′) − F((1−α)θ + αθ′)`.
pub fn skew_jensen<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>, alpha: T) -> Result<T> {
    theta.check_same_dim(theta2)?;
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(skew_jensen_unchecked(theta, theta2, alpha))
}

fn skew_jensen_unchecked<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>, alpha: T) -> T {
    let beta = T::one() - alpha;
    let d = theta.d;
    let s = cone_norm(d, theta.combine(beta, theta2, alpha)).expect("the cone is convex");
    beta * cumulant(theta) + alpha * cumulant(theta2) + log_normalizer(d, s)
}

pub fn kld_via_skew_limit<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>, eps: T) -> Result<T> {
    Ok(skew_jensen(theta, theta2, eps)? / (eps * (T::one() - eps)))
}

/// Chernoff information `(α*, max_α skew_jensen)`.
pub fn chernoff<T: Real>(theta: &LorentzParam<T>, theta2: &LorentzParam<T>) -> Result<(T, T)> {
    theta.check_same_dim(theta2)?;
    Ok(golden_max(
        |a| skew_jensen_unchecked(theta, theta2, a),
        T::zero(),
        T::one(),
        T::of(1e-9),
    ))
}

/// Entropy relative to the invariant measure at `d = 2`: `1 + log 2π − log|θ|`.
pub fn modified_entropy2<T: Real>(theta: &LorentzParam<T>) -> Result<T> {
    if theta.d != 2 {
        return Err(Error::UnsupportedDimension(theta.d));
    }
    Ok(T::one() + (T::two() * T::PI()).ln() - theta.minkowski_norm().ln())
}

/// Average sufficient statistic `(−x̃₀, x₁, …, x_d)` with compensated summation.
pub fn mean_statistic<T: Real>(points: &[HyperboloidPoint<T>]) -> Result<Vec<T>> {
    let first = points
        .first()
        .ok_or_else(|| Error::DualDomain("no points".into()))?;
    let d = first.dim();
    let mut sums = vec![CompensatedSum::new(); d + 1];
    for p in points {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.dim(),
            });
        }
        for (s, v) in sums.iter_mut().zip(p.sufficient_stat()) {
            s.add(v);
        }
    }
    let n = T::from_usize(points.len()).expect("count fits in scalar");
    Ok(sums.iter().map(|s| s.value() / n).collect())
}

/// Inverts `η = ∇F(θ)`: solves `K_{ν+1}/K_ν(t) = √[η, η]`, then `θ = −(t/√[η,η]) Gη`.
pub fn grad_conjugate<T: Real>(eta: &[T]) -> Result<LorentzParam<T>> {
    if eta.len() < 3 {
        return Err(Error::UnsupportedDimension(eta.len().saturating_sub(1)));
    }
    let d = eta.len() - 1;
    let q = minkowski_unchecked(eta, eta);
    if !(eta[0] < T::zero() && q > T::zero()) {
        return Err(Error::DualDomain(format!(
            "moment vector must lie in the past cone, got eta_0 = {}, [eta, eta] = {}",
            eta[0], q
        )));
    }
    let m = q.sqrt();
    if !(m > T::one()) {
        return Err(Error::DualDomain(format!(
            "moment vector needs [eta, eta] > 1 (got {q}); the sample has fewer than two distinct points"
        )));
    }
    let t = invert_ratio(d, m);
    let k = t / m;
    LorentzParam::new(flip(eta).into_iter().map(|g| -k * g).collect())
}

/// Solves `K_{ν+1}(t)/K_ν(t) = m` for `m > 1`; the ratio decreases from `∞` to 1.
fn invert_ratio<T: Real>(d: usize, m: T) -> T {
    if d == 2 {
        return T::one() / (m - T::one());
    }
    let nu: f64 = (d as f64 - 1.0) / 2.0;
    let target = m.to_f64_lossy();
    let g = |log_t: f64| bessel_k_ratio(nu, log_t.exp()).unwrap() - target;
    // ratio ≈ 1 + (ν + ½)/t for large t and ≈ 2(ν+1)/t... for small t; bracket generously.
    let guess = (nu + 0.5) / (target - 1.0);
    let (mut lo, mut hi) = (guess.ln() - 2.0, guess.ln() + 2.0);
    while g(lo) < 0.0 {
        lo -= 2.0;
    }
    while g(hi) > 0.0 {
        hi += 2.0;
    }
    let t = bisect(g, lo, hi, 200).exp();
    // One Newton polish in the working precision.
    let tt = T::of(t);
    let nu_t: T = order(d);
    let r = bessel_k_ratio(nu_t, tt).unwrap();
    // d/dt (K_{ν+1}/K_ν) = r² − (2ν+1) r / t − 1.
    let dr = r * r - (T::two() * nu_t + T::one()) * r / tt - T::one();
    if dr < T::zero() {
        tt - (r - m) / dr
    } else {
        tt
    }
}

/// Maximum-likelihood estimate from chart points.
pub fn mle<T: Real>(points: &[HyperboloidPoint<T>]) -> Result<LorentzParam<T>> {
    let first = points
        .first()
        .ok_or_else(|| Error::DualDomain("MLE needs at least two distinct points, got none".into()))?;
    if points.iter().all(|p| p == first) {
        return Err(Error::DualDomain("MLE needs at least two distinct points".into()));
    }
    grad_conjugate(&mean_statistic(points)?)
}

pub fn log_likelihood<T: Real>(theta: &LorentzParam<T>, points: &[HyperboloidPoint<T>]) -> Result<T> {
    let log_c = log_normalizer(theta.d, theta.minkowski_norm());
    let mut s = CompensatedSum::new();
    for p in points {
        check_point(theta, p)?;
        s.add(log_density_with(theta, log_c, p));
    }
    Ok(s.value())
}
