//! Test oracles: adaptive Gauss–Kronrod quadrature, finite differences and
//! random cone points. Nothing here calls the closed forms under test.
#![allow(dead_code)]

use hyperstat::geometry::{LorentzParam, SpdParam2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// K15 estimate and |K15 − G7| on `[a, b]`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive G7/K15 quadrature on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let (i0, e0) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, i0, e0)];
    for _ in 0..4000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (l, le) = gk15(&mut f, lo, mid);
        let (r, re) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, l, le));
        parts.push((mid, hi, r, re));
    }
    let mut s = 0.0;
    let mut c = 0.0;
    for p in &parts {
        // Neumaier summation of the panel values.
        let t = s + p.2;
        c += if s.abs() >= p.2.abs() { (s - t) + p.2 } else { (p.2 - t) + s };
        s = t;
    }
    s + c
}

/// `∫_ℝ f` via `x = u/(1 − u²)`.
pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, abs_tol: f64) -> f64 {
    integrate(
        |u| {
            let d = 1.0 - u * u;
            if d <= 0.0 {
                return 0.0;
            }
            let x = u / d;
            let v = f(x) * (1.0 + u * u) / (d * d);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        -1.0,
        1.0,
        abs_tol,
        1e-12,
    )
}

/// `∫_a^∞ f` via `x = a + u/(1 − u)`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64) -> f64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - u;
            let v = f(a + u / d) / (d * d);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        1e-12,
    )
}

/// Nested adaptive quadrature on a rectangle.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, x: (f64, f64), y: (f64, f64), abs_tol: f64) -> f64 {
    integrate(
        |u| integrate(|v| f(u, v), y.0, y.1, abs_tol / (10.0 * (x.1 - x.0)), 1e-13),
        x.0,
        x.1,
        abs_tol,
        1e-12,
    )
}

/// `∫∫ g(x, y) dx dy` over the upper half-plane, in coordinates adapted to a
/// reference SPD matrix `(a, b, c)`: `y = e^v`, `x = −b/a + √(y/a)·w`.
/// The reference Poincaré density is Gaussian in `w` and double-exponential in `v`.
pub fn halfplane_integral<F: Fn(f64, f64) -> f64>(g: F, reference: (f64, f64, f64), abs_tol: f64) -> f64 {
    let (a, b, c) = reference;
    let d2 = a * c - b * b;
    assert!(a > 0.0 && d2 > 0.0);
    let x0 = -b / a;
    let v_lo = (d2 / (400.0 * a)).ln();
    let v_hi = (400.0 / a).ln();
    integrate_2d(
        |v, w| {
            let y = v.exp();
            let s = (y / a).sqrt();
            let x = x0 + s * w;
            let val = g(x, y) * s * y;
            if val.is_finite() {
                val
            } else {
                0.0
            }
        },
        (v_lo, v_hi),
        (-13.0, 13.0),
        abs_tol,
    )
}

/// `∫ g(x₁, x₂) dx₁dx₂` over the chart of 𝕃², in polar coordinates around
/// the mode direction of a reference parameter. The boost is built here
/// rather than borrowed from the library.
pub fn chart_integral<F: Fn(f64, f64) -> f64>(g: F, reference: [f64; 3], abs_tol: f64) -> f64 {
    let t = (reference[0].powi(2) - reference[1].powi(2) - reference[2].powi(2)).sqrt();
    let u = [reference[0] / t, reference[1] / t, reference[2] / t];
    let r_max = 120.0 / t + 10.0;
    integrate_2d(
        |r, phi| {
            let (y1, y2) = (r * phi.cos(), r * phi.sin());
            let y0 = (1.0 + r * r).sqrt();
            // Boost taking (1,0,0) to u, applied to (y0, y1, y2).
            let dot = u[1] * y1 + u[2] * y2;
            let x0 = u[0] * y0 + dot;
            let k = y0 + dot / (1.0 + u[0]);
            let x1 = y1 + u[1] * k;
            let x2 = y2 + u[2] * k;
            // dx/x0 = dy/y0 on the hyperboloid.
            let val = g(x1, x2) * (x0 / y0) * r;
            if val.is_finite() {
                val
            } else {
                0.0
            }
        },
        (0.0, r_max),
        (0.0, std::f64::consts::TAU),
        abs_tol,
    )
}

/// Central difference of a scalar function along coordinate `i`.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

/// Five-point central difference (fourth order).
pub fn central_diff5<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut p = x.to_vec();
        p[i] += s * h;
        f(&p)
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD parameter with moderate conditioning.
pub fn random_spd<R: Rng>(r: &mut R) -> SpdParam2<f64> {
    let a = r.gen_range(-1.0f64..1.0).exp();
    let c = r.gen_range(-1.0f64..1.0).exp();
    let rho = r.gen_range(-0.85..0.85);
    SpdParam2::new(a, rho * (a * c).sqrt(), c).unwrap()
}

/// Random interior point of the d = 2 Lorentz cone.
pub fn random_lorentz<R: Rng>(r: &mut R) -> LorentzParam<f64> {
    let t = r.gen_range(-0.7f64..1.5).exp();
    let beta = r.gen_range(0.0..1.8);
    let phi = r.gen_range(0.0..std::f64::consts::TAU);
    LorentzParam::new(vec![
        t * f64::cosh(beta),
        t * f64::sinh(beta) * phi.cos(),
        t * f64::sinh(beta) * phi.sin(),
    ])
    .unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Largest absolute entry of a square matrix.
pub fn max_abs(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// χ² upper quantile.
pub fn chi2_quantile(df: f64, p: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df).unwrap().inverse_cdf(p)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// KS critical value at α = 0.01 for sample sizes `n`, `m`.
pub fn ks_critical_01(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.627_6 * ((n + m) / (n * m)).sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Inverse of a 3×3 matrix by cofactors.
pub fn inv3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j][i] = c(i, j) / det;
        }
    }
    out
}

pub fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}
