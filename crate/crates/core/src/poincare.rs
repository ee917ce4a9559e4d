//! The Poincaré family on the upper half-plane.
//!
//! `p_θ(x, y) = (D e^{2D} / π) · exp(−(a(x²+y²) + 2bx + c)/y) / y²` with
//! `θ = [[a, b], [b, c]]` symmetric positive definite and `D = √|θ|`.
//!
//! Natural parameters are paired with statistics by `⟨θ, t⟩ = a t₁₁ + 2b t₁₂ + c t₂₂`.
//! Bregman and conjugate quantities use the reduced cumulant
//! `F(θ) = −½ log|θ| − 2D`, which differs from the true log-normalizer by `log π`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Moment2, SpdParam2, UpperHalfPoint};
use crate::optim::golden_max;
use crate::scalar::{CompensatedSum, Real};
use crate::specfun::exp_gamma0;

/// A 3×3 matrix in the `(a, b, c)` coordinates.
pub type Matrix3<T> = [[T; 3]; 3];
/// A 3×3×3 tensor in the `(a, b, c)` coordinates.
pub type Tensor3<T> = [[[T; 3]; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantPair<T> {
    pub full: T,
    pub reduced: T,
}

/// A Poincaré distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareModel<T> {
    pub theta: SpdParam2<T>,
}

impl<T: Real> PoincareModel<T> {
    pub fn new(theta: SpdParam2<T>) -> Self {
        Self { theta }
    }

    pub fn log_density(&self, z: &UpperHalfPoint<T>) -> T {
        log_density(&self.theta, z)
    }

    pub fn cumulant(&self) -> CumulantPair<T> {
        cumulant(&self.theta)
    }

    pub fn moments(&self) -> Moment2<T> {
        grad_cumulant(&self.theta)
    }

    pub fn entropy(&self) -> T {
        entropy(&self.theta)
    }
}

/// Vector statistic `−((x²+y²)/y, x/y, 1/y)`.
pub fn sufficient_stat<T: Real>(z: &UpperHalfPoint<T>) -> [T; 3] {
    z.sufficient_stat()
}

/// Matrix statistic `−(1/y)[[x²+y², x], [x, 1]]`; negative definite with determinant 1.
pub fn sufficient_stat_matrix<T: Real>(z: &UpperHalfPoint<T>) -> Moment2<T> {
    let [p, q, r] = z.sufficient_stat();
    Moment2::new(p, q, r)
}

pub fn log_density<T: Real>(theta: &SpdParam2<T>, z: &UpperHalfPoint<T>) -> T {
    let (x, y) = (z.x, z.y);
    let d = theta.sqrt_det();
    let exponent = (theta.a * (x * x + y * y) + T::two() * theta.b * x + theta.c) / y;
    d.ln() + T::two() * d - T::PI().ln() - exponent - T::two() * y.ln()
}

pub fn cumulant<T: Real>(theta: &SpdParam2<T>) -> CumulantPair<T> {
    let det = theta.det();
    let d = det.sqrt();
    let reduced = -det.ln() / T::two() - T::two() * d;
    CumulantPair {
        full: T::PI().ln() - d.ln() - T::two() * d,
        reduced,
    }
}

fn reduced_from_det<T: Real>(det: T) -> T {
    -det.ln() / T::two() - T::two() * det.sqrt()
}

/// `η = ∇F(θ) = −(½ + D) θ⁻¹`.
pub fn grad_cumulant<T: Real>(theta: &SpdParam2<T>) -> Moment2<T> {
    let d = theta.sqrt_det();
    let k = -(T::of(0.5) + d);
    let (ia, ib, ic) = theta.inverse_entries();
    Moment2::new(k * ia, k * ib, k * ic)
}

/// `D(θ)` recovered from the moment determinant: `√|η| = 1 + 1/(2D)`.
fn dual_sqrt_det<T: Real>(eta: &Moment2<T>) -> Result<T> {
    if !eta.is_negative_definite() {
        return Err(Error::DualDomain(format!(
            "moment matrix must be negative definite, got [[{}, {}], [{}, {}]]",
            eta.p, eta.q, eta.q, eta.r
        )));
    }
    let s = eta.det().sqrt();
    if !(s > T::one()) {
        return Err(Error::DualDomain(format!(
            "moment matrix needs |eta| > 1 (got {}); the sample has fewer than two distinct points",
            eta.det()
        )));
    }
    Ok(T::one() / (T::two() * (s - T::one())))
}

/// Convex conjugate `F*(η) = log D − 1` of the reduced cumulant.
pub fn conjugate<T: Real>(eta: &Moment2<T>) -> Result<T> {
    Ok(dual_sqrt_det(eta)?.ln() - T::one())
}

/// `θ = ∇F*(η) = −(½ + D) η⁻¹`.
pub fn grad_conjugate<T: Real>(eta: &Moment2<T>) -> Result<SpdParam2<T>> {
    let d = dual_sqrt_det(eta)?;
    let k = -(T::of(0.5) + d) / eta.det();
    SpdParam2::new(k * eta.r, -k * eta.q, k * eta.p)
}

/// `KL(p_θ : p_θ′) = B_F(θ′ : θ)`.
pub fn kld<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> T {
    let (det1, det2) = (theta.det(), theta2.det());
    let (d1, d2) = (det1.sqrt(), det2.sqrt());
    let half = T::of(0.5);
    half * (det1 / det2).ln() + T::two() * (d1 - d2) + (half + d1) * (theta.trace_ratio(theta2) - T::two())
}

/// Log Bhattacharyya coefficient `log ∫ √(p_θ p_θ′)`.
fn log_bhattacharyya<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> T {
    let (det1, det2) = (theta.det(), theta2.det());
    let sum_det = theta.combined_det(T::one(), theta2, T::one());
    let quarter = T::of(0.25);
    T::two().ln() + quarter * (det1.ln() + det2.ln()) + det1.sqrt() + det2.sqrt()
        - sum_det.ln() / T::two()
        - sum_det.sqrt()
}

/// Squared Hellinger divergence with generator `(√u − 1)²/2`.
pub fn hellinger_sq<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> T {
    -log_bhattacharyya(theta, theta2).exp_m1()
}

/// Neyman χ² divergence `∫ p_θ′²/p_θ − 1`; `+∞` when `2θ′ − θ` leaves the cone.
pub fn neyman_chi2<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> T {
    let (a, b, c) = theta2.combine(T::two(), theta, -T::one());
    let Ok(m) = SpdParam2::new(a, b, c) else {
        return T::infinity();
    };
    let (det1, det2, det3) = (theta.det(), theta2.det(), m.det());
    let (d1, d2, d3) = (det1.sqrt(), det2.sqrt(), det3.sqrt());
    let log_ratio = det2.ln() + T::of(4.0) * d2 - d1.ln() - d3.ln() - T::two() * (d1 + d3);
    log_ratio.exp_m1()
}

/// `KL(θ : θ′) + KL(θ′ : θ)`.
pub fn jeffreys<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> T {
    kld(theta, theta2) + kld(theta2, theta)
}

/// `(1−α)F(θ) + αF(θ′) − F((1−α)θ + αθ′)`, the negated log of `∫ p_θ^{1−α} p_θ′^α`.
pub fn skew_jensen<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(skew_jensen_unchecked(theta, theta2, alpha))
}

fn skew_jensen_unchecked<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>, alpha: T) -> T {
    let beta = T::one() - alpha;
    let mix = theta.combined_det(beta, theta2, alpha);
    beta * reduced_from_det(theta.det()) + alpha * reduced_from_det(theta2.det()) - reduced_from_det(mix)
}

/// `skew_jensen(θ, θ′, ε) / (ε(1 − ε))`, which tends to `kld(θ, θ′)` as `ε → 0`.
pub fn kld_via_skew_limit<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>, eps: T) -> Result<T> {
    Ok(skew_jensen(theta, theta2, eps)? / (eps * (T::one() - eps)))
}

/// Chernoff information: `(α*, max_α skew_jensen(θ, θ′, α))`.
pub fn chernoff<T: Real>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> (T, T) {
    golden_max(
        |a| skew_jensen_unchecked(theta, theta2, a),
        T::zero(),
        T::one(),
        T::of(1e-9),
    )
}

/// Differential entropy `1 + log(πD) − 2 log a − 2 e^{4D} Γ(0, 4D)`.
pub fn entropy<T: Real>(theta: &SpdParam2<T>) -> T {
    let d = theta.sqrt_det();
    T::one() + (T::PI() * d).ln() - T::two() * theta.a.ln() - T::two() * scaled_gamma(T::of(4.0) * d)
}

/// `E[log y] = log(D/a) − e^{4D} Γ(0, 4D)`.
pub fn expected_log_y<T: Real>(theta: &SpdParam2<T>) -> T {
    let d = theta.sqrt_det();
    (d / theta.a).ln() - scaled_gamma(T::of(4.0) * d)
}

fn scaled_gamma<T: Real>(x: T) -> T {
    exp_gamma0(x).expect("4D is positive for cone parameters")
}

/// Entropy relative to the invariant measure `dx dy / y²`: `1 + log π − ½ log|θ|`.
pub fn modified_entropy<T: Real>(theta: &SpdParam2<T>) -> T {
    T::one() + T::PI().ln() - theta.det().ln() / T::two()
}

/// Derivatives of `φ(u) = −½ log u − 2√u`.
fn phi_derivs<T: Real>(u: T) -> (T, T, T) {
    let half = T::of(0.5);
    let su = u.sqrt();
    let d1 = -half / u - T::one() / su;
    let d2 = half / (u * u) + half / (u * su);
    let d3 = -T::one() / (u * u * u) - T::of(0.75) / (u * u * su);
    (d1, d2, d3)
}

/// Fisher information `∇²F(θ)` in the `(a, b, c)` coordinates.
pub fn fim<T: Real>(theta: &SpdParam2<T>) -> Matrix3<T> {
    let u = theta.det();
    let (d1, d2, _) = phi_derivs(u);
    let gu = [theta.c, -T::two() * theta.b, theta.a];
    let hu = det_hessian::<T>();
    let mut h = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] = d2 * gu[i] * gu[j] + d1 * hu[i][j];
        }
    }
    h
}

/// Hessian of `ac − b²` in `(a, b, c)`.
fn det_hessian<T: Real>() -> Matrix3<T> {
    let (z, o) = (T::zero(), T::one());
    [[z, z, o], [z, -T::two(), z], [o, z, z]]
}

/// Hessian of `F*` in the coordinates `(η₁₁, 2η₁₂, η₂₂)` dual to `(a, b, c)`.
pub fn fim_dual<T: Real>(eta: &Moment2<T>) -> Result<Matrix3<T>> {
    dual_sqrt_det(eta)?;
    let (p, big_q, r) = (eta.p, T::two() * eta.q, eta.r);
    let n = eta.det();
    let s = n.sqrt();
    let sm1 = s - T::one();
    let g1 = -T::one() / (T::two() * s * sm1);
    let g2 = (T::two() * s - T::one()) / (T::of(4.0) * s * s * s * sm1 * sm1);
    let gn = [r, -big_q / T::two(), p];
    let (z, o) = (T::zero(), T::one());
    let hn = [[z, z, o], [z, -T::of(0.5), z], [o, z, z]];
    let mut h = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] = g2 * gn[i] * gn[j] + g1 * hn[i][j];
        }
    }
    Ok(h)
}

/// Amari–Chentsov tensor `∇³F(θ)` in the `(a, b, c)` coordinates.
pub fn cubic_tensor<T: Real>(theta: &SpdParam2<T>) -> Tensor3<T> {
    let u = theta.det();
    let (_, d2, d3) = phi_derivs(u);
    let gu = [theta.c, -T::two() * theta.b, theta.a];
    let hu = det_hessian::<T>();
    let mut t = [[[T::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                t[i][j][k] = d3 * gu[i] * gu[j] * gu[k]
                    + d2 * (hu[i][j] * gu[k] + hu[i][k] * gu[j] + hu[j][k] * gu[i]);
            }
        }
    }
    t
}

/// Average sufficient statistic with compensated summation.
pub fn mean_statistic<T: Real>(points: &[UpperHalfPoint<T>]) -> Result<Moment2<T>> {
    if points.is_empty() {
        return Err(Error::DualDomain("no points".into()));
    }
    let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    for z in points {
        for (s, v) in sums.iter_mut().zip(z.sufficient_stat()) {
            s.add(v);
        }
    }
    let n = T::from_usize(points.len()).expect("count fits in scalar");
    Ok(Moment2::new(sums[0].value() / n, sums[1].value() / n, sums[2].value() / n))
}

/// Maximum-likelihood estimate `θ̂ = ∇F*(mean t(zᵢ))`.
pub fn mle<T: Real>(points: &[UpperHalfPoint<T>]) -> Result<SpdParam2<T>> {
    let first = points
        .first()
        .ok_or_else(|| Error::DualDomain("MLE needs at least two distinct points, got none".into()))?;
    if points.iter().all(|z| z == first) {
        return Err(Error::DualDomain("MLE needs at least two distinct points".into()));
    }
    grad_conjugate(&mean_statistic(points)?)
}

/// `Σ log p_θ(zᵢ)`.
pub fn log_likelihood<T: Real>(theta: &SpdParam2<T>, points: &[UpperHalfPoint<T>]) -> T {
    let mut s = CompensatedSum::new();
    for z in points {
        s.add(log_density(theta, z));
    }
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex() -> (SpdParam2<f64>, SpdParam2<f64>) {
        (
            SpdParam2::new(4.0, 0.25, 0.5).unwrap(),
            SpdParam2::new(0.5, 0.25, 2.0).unwrap(),
        )
    }

    #[test]
    fn example_values() {
        let (th, tp) = ex();
        assert!((cumulant(&th).reduced + 3.114581).abs() < 1e-5);
        assert!((cumulant(&tp).reduced + 1.904222).abs() < 1e-5);
        assert!((conjugate(&grad_cumulant(&th)).unwrap() + 0.669301).abs() < 1e-5);
        assert!((kld(&th, &tp) - 5.360423).abs() < 1e-5);
        assert!((kld(&tp, &th) - 8.577947).abs() < 1e-5);
        assert!((entropy(&th) + 0.607468).abs() < 1e-5);
        assert!((entropy(&tp) - 3.074661).abs() < 1e-5);
    }

    #[test]
    fn identity_values() {
        let i = SpdParam2::<f64>::identity();
        let z = UpperHalfPoint::new(0.0, 1.0).unwrap();
        assert!((log_density(&i, &z) + std::f64::consts::PI.ln()).abs() < 1e-15);
        let c = cumulant(&i);
        assert!((c.full - (std::f64::consts::PI.ln() - 2.0)).abs() < 1e-15);
        assert_eq!(c.reduced, -2.0);
        let eta = grad_cumulant(&i);
        assert_eq!((eta.p, eta.q, eta.r), (-1.5, 0.0, -1.5));
        assert!((modified_entropy(&i) - (1.0 + std::f64::consts::PI.ln())).abs() < 1e-15);
        assert!((expected_log_y(&i) + exp_gamma0(4.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn neyman_cases() {
        let half = SpdParam2::<f64>::new(0.5, 0.0, 0.5).unwrap();
        let i = SpdParam2::identity();
        assert!((neyman_chi2(&half, &i) - 1.0 / 3.0).abs() < 1e-12);
        let four = SpdParam2::new(4.0, 0.0, 4.0).unwrap();
        assert!(neyman_chi2(&four, &i).is_infinite());
        assert_eq!(neyman_chi2(&i, &i), 0.0);
    }

    #[test]
    fn cubic_tensor_at_identity() {
        let t = cubic_tensor(&SpdParam2::<f64>::identity());
        assert!((t[0][0][0] + 1.75).abs() < 1e-15);
    }

    #[test]
    fn mle_rejects_degenerate() {
        let z = UpperHalfPoint::new(0.3, 1.2).unwrap();
        assert!(matches!(mle(&[z, z]), Err(Error::DualDomain(_))));
        assert!(mle::<f64>(&[]).is_err());
    }

    #[test]
    fn skew_rejects_bad_alpha() {
        let (th, tp) = ex();
        assert!(skew_jensen(&th, &tp, 0.0).is_err());
        assert!(skew_jensen(&th, &tp, 1.0).is_err());
    }
}
