//! Special functions shared by both families.
//!
//! * [`bessel_k`]: modified Bessel function of the second kind `K_ν(x)` for real
//!   order and positive argument, returned together with its logarithm so that
//!   callers working at large `x` never see the underflowed value.
//! * [`bessel_k_logderiv`] and [`bessel_k_ratio`]: `K'_ν/K_ν` and `K_{ν+1}/K_ν`.
//! * [`exp_gamma0`]: the scaled upper incomplete gamma `eˣ Γ(0, x) = eˣ E₁(x)`.
//!
//! Half-integer orders use the terminating closed form. Other orders reduce to
//! `|μ| ≤ 1/2` and use Temme's series (`x ≤ 2`) or Steed's continued fraction
//! (`x > 2`), followed by the upward recurrence carried out on ratios, which
//! cannot overflow.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A function value with its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialValue<T> {
    pub value: T,
    /// `ln(value)`; finite even when `value` underflows to zero.
    pub log_value: T,
}

impl<T: Real> SpecialValue<T> {
    fn from_log(log_value: T) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
        }
    }
}

const MAX_ITER: usize = 10_000;

fn check_arg<T: Real>(x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Bessel/gamma argument must be positive and finite, got {x}")))
    }
}

/// `K_ν(x)` for `x > 0`. Negative orders are folded onto `|ν|`.
pub fn bessel_k<T: Real>(order: T, x: T) -> Result<SpecialValue<T>> {
    check_arg(x)?;
    let nu = order.abs();
    if let Some(n) = half_integer_index(nu) {
        return Ok(SpecialValue::from_log(log_k_half_integer(n, x)));
    }
    let (log_k, _) = log_k_and_ratio(nu, x);
    Ok(SpecialValue::from_log(log_k))
}

/// `K_{ν+1}(x) / K_ν(x)` for real `ν` and `x > 0`.
pub fn bessel_k_ratio<T: Real>(order: T, x: T) -> Result<T> {
    check_arg(x)?;
    if order < T::zero() {
        // K_{ν+1}/K_ν = K_{μ−1}/K_μ with μ = −ν.
        let mu = -order;
        return if mu >= T::one() {
            Ok(T::one() / bessel_k_ratio(mu - T::one(), x)?)
        } else {
            Ok((bessel_k(T::one() - mu, x)?.log_value - bessel_k(mu, x)?.log_value).exp())
        };
    }
    if let Some(n) = half_integer_index(order) {
        return Ok((log_k_half_integer(n + 1, x) - log_k_half_integer(n, x)).exp());
    }
    let (_, ratio) = log_k_and_ratio(order, x);
    Ok(ratio)
}

/// `d/dx ln K_ν(x)`, from `K'_ν = −(K_{ν−1} + K_{ν+1})/2`.
///
/// With `r = K_{ν+1}/K_ν` the recurrence `K_{ν−1} = K_{ν+1} − (2ν/x) K_ν` gives
/// `K'_ν/K_ν = −r + ν/x`.
pub fn bessel_k_logderiv<T: Real>(order: T, x: T) -> Result<T> {
    let nu = order.abs();
    let r = bessel_k_ratio(nu, x)?;
    Ok(nu / x - r)
}

/// Returns `n` when `nu == n + 1/2` exactly.
fn half_integer_index<T: Real>(nu: T) -> Option<usize> {
    let shifted = nu - T::of(0.5);
    if shifted >= T::zero() && shifted == shifted.round() {
        shifted.to_usize()
    } else {
        None
    }
}

/// `ln K_{n+1/2}(x) = ½ ln(π/2x) − x + ln Σ_k (n+k)!/(k!(n−k)!) (2x)^{−k}`.
fn log_k_half_integer<T: Real>(n: usize, x: T) -> T {
    // a_k = (n+k)! / (k! (n-k)!)
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut a = T::one();
    coeffs.push(a);
    for k in 0..n {
        let kf = T::from_usize(k).unwrap();
        let nf = T::from_usize(n).unwrap();
        a = a * (nf + kf + T::one()) * (nf - kf) / (kf + T::one());
        coeffs.push(a);
    }
    let two_x = T::two() * x;
    let log_sum = if two_x >= T::one() {
        let z = two_x.recip();
        let mut acc = T::zero();
        for &c in coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc.ln()
    } else {
        // Dominated by the highest power of 1/(2x): factor it out.
        let mut acc = T::zero();
        for &c in coeffs.iter() {
            acc = acc * two_x + c;
        }
        acc.ln() - T::from_usize(n).unwrap() * two_x.ln()
    };
    T::of(0.5) * (T::PI() / two_x).ln() - x + log_sum
}

/// `(ln K_ν(x), K_{ν+1}(x)/K_ν(x))` for general `ν ≥ 0`.
fn log_k_and_ratio<T: Real>(nu: T, x: T) -> (T, T) {
    let steps = nu.round();
    let mu = nu - steps;
    let m = steps.to_usize().unwrap_or(0);
    let (log_k_mu, mut ratio) = if x <= T::two() {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };
    let mut log_k = log_k_mu;
    for j in 0..m {
        log_k = log_k + ratio.ln();
        let order = mu + T::from_usize(j + 1).unwrap();
        ratio = T::two() * order / x + ratio.recip();
    }
    (log_k, ratio)
}

/// `1/Γ(1+μ)`-related Chebyshev expansions valid for `|μ| ≤ 1/2`:
/// returns `(gam1, gam2, 1/Γ(1+μ), 1/Γ(1−μ))`.
fn temme_gammas<T: Real>(mu: T) -> (T, T, T, T) {
    const C1: [f64; 7] = [
        -1.142022680371168e0,
        6.5165112670737e-3,
        3.087090173086e-4,
        -3.4706269649e-6,
        6.9437664e-9,
        3.67795e-11,
        -1.356e-13,
    ];
    const C2: [f64; 8] = [
        1.843740587300905e0,
        -7.68528408447867e-2,
        1.2719271366546e-3,
        -4.9717367042e-6,
        -3.31261198e-8,
        2.423096e-10,
        -1.702e-13,
        -1.49e-15,
    ];
    let xx = T::of(8.0) * mu * mu - T::one();
    let gam1 = chebyshev(&C1, xx);
    let gam2 = chebyshev(&C2, xx);
    (gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1)
}

fn chebyshev<T: Real>(coeffs: &[f64], x: T) -> T {
    let mut d = T::zero();
    let mut dd = T::zero();
    let y2 = T::two() * x;
    for &c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = y2 * d - dd + T::of(c);
        dd = sv;
    }
    x * d - dd + T::of(0.5 * coeffs[0])
}

/// Temme's series for `K_μ`, `K_{μ+1}` at `x ≤ 2`.
fn temme_series<T: Real>(mu: T, x: T) -> (T, T) {
    let eps = T::epsilon();
    let half = T::of(0.5);
    let x2 = half * x;
    let pimu = T::PI() * mu;
    let fact = if pimu.abs() < eps { T::one() } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < eps { T::one() } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = half * e / gampl;
    let mut q = half / (e * gammi);
    let mut c = T::one();
    let dsq = x2 * x2;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = T::from_usize(i).unwrap();
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c = c * dsq / fi;
        p = p / (fi - mu);
        q = q / (fi + mu);
        let del = c * ff;
        sum = sum + del;
        let del1 = c * (p - fi * ff);
        sum1 = sum1 + del1;
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    let k_mu = sum;
    let k_mu1 = sum1 * T::two() / x;
    (k_mu.ln(), k_mu1 / k_mu)
}

/// Steed's continued fraction (CF2) for `K_μ`, `K_{μ+1}` at `x > 2`, in
/// exponentially scaled form.
fn steed_cf2<T: Real>(mu: T, x: T) -> (T, T) {
    let eps = T::epsilon();
    let half = T::of(0.5);
    let mut b = T::two() * (T::one() + x);
    let mut d = b.recip();
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::of(0.25) - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    for i in 1..MAX_ITER {
        let fi = T::from_usize(i).unwrap();
        a = a - T::two() * fi;
        c = -a * c / (fi + T::one());
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + T::two();
        d = (b + a * d).recip();
        delh = (b * d - T::one()) * delh;
        h = h + delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < eps {
            break;
        }
    }
    let log_k = half * (T::PI() / (T::two() * x)).ln() - s.ln() - x;
    let ratio = (mu + x + half - a1 * h) / x;
    (log_k, ratio)
}

/// `eˣ Γ(0, x)` for `x > 0`, accurate without overflow at any `x`.
pub fn exp_gamma0<T: Real>(x: T) -> Result<T> {
    check_arg(x)?;
    if x >= T::one() {
        // Modified Lentz on E₁(x)eˣ = 1/(x+1− 1²/(x+3− 2²/(x+5− …))).
        let tiny = T::min_positive_value() / T::epsilon();
        let mut b = x + T::one();
        let mut c = tiny.recip();
        let mut d = b.recip();
        let mut h = d;
        for i in 1..MAX_ITER {
            let fi = T::from_usize(i).unwrap();
            let an = -fi * fi;
            b = b + T::two();
            d = (an * d + b).recip();
            c = b + an / c;
            let del = c * d;
            h = h * del;
            if (del - T::one()).abs() < T::epsilon() {
                break;
            }
        }
        Ok(h)
    } else {
        // E₁(x) = −γ − ln x − Σ_{k≥1} (−x)^k / (k·k!)
        let euler = T::of(0.577_215_664_901_532_9);
        let mut term = T::one();
        let mut series = T::zero();
        for k in 1..MAX_ITER {
            let fk = T::from_usize(k).unwrap();
            term = -term * x / fk;
            let add = term / fk;
            series = series + add;
            if add.abs() < series.abs() * T::epsilon() {
                break;
            }
        }
        Ok((-euler - x.ln() - series) * x.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_closed_form() {
        let k = bessel_k(0.5f64, 2.0).unwrap();
        let exact = (std::f64::consts::PI / 4.0).sqrt() * (-2.0f64).exp();
        assert!((k.value - exact).abs() < 1e-15);
        assert!((k.value - 0.119_937_771_968_061_44).abs() < 1e-15);
    }

    #[test]
    fn negative_order_folds() {
        let a = bessel_k(-0.5f64, 3.0).unwrap();
        let b = bessel_k(0.5f64, 3.0).unwrap();
        assert_eq!(a, b);
        let a = bessel_k(-1.3f64, 0.7).unwrap();
        let b = bessel_k(1.3f64, 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn half_order_logderiv() {
        let l = bessel_k_logderiv(0.5f64, 2.0).unwrap();
        assert!((l + 1.25).abs() < 1e-14);
        let far = bessel_k_logderiv(0.5f64, 1e8).unwrap();
        assert!((far + 1.0).abs() < 1e-7);
    }

    #[test]
    fn log_value_survives_underflow() {
        let k = bessel_k(1.0f64, 800.0).unwrap();
        assert_eq!(k.value, 0.0);
        // ln K_1(800) ≈ ½ln(π/1600) − 800 + ln(1 + 3/(8·800) + …)
        let approx = 0.5 * (std::f64::consts::PI / 1600.0).ln() - 800.0 + (1.0 + 3.0 / 6400.0f64).ln();
        assert!((k.log_value - approx).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_k(0.0f64, 0.0).is_err());
        assert!(bessel_k(0.0f64, -1.0).is_err());
        assert!(bessel_k_logderiv(1.0f64, 0.0).is_err());
        assert!(exp_gamma0(0.0f64).is_err());
        assert!(exp_gamma0(-2.0f64).is_err());
    }

    #[test]
    fn exp_gamma0_branches_meet() {
        let below = exp_gamma0(1.0f64 - 1e-12).unwrap();
        let above = exp_gamma0(1.0f64).unwrap();
        assert!((below - above).abs() < 1e-10);
        assert!((above - 0.596_347_362_323_194_6).abs() < 1e-12);
    }

    #[test]
    fn exp_gamma0_asymptote() {
        for &x in &[1e3f64, 1e6, 1e12] {
            let v = exp_gamma0(x).unwrap();
            assert!((x * v - 1.0).abs() < 2.0 / x);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let k = bessel_k(0.0f32, 1.0).unwrap();
        assert!((k.value - 0.421_024_44).abs() < 1e-5);
        let g = exp_gamma0(5.567_764f32).unwrap();
        assert!((g - 0.155_154_4).abs() < 1e-5);
    }
}
