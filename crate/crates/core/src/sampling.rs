//! Exact variate generation.
//!
//! Randomness is addressed by `(seed, stream_id, block)`: each [`RngStream`] is a
//! ChaCha20 stream, and draw `i` of a request always comes from block
//! `i / BLOCK_SIZE`, whose generator starts at a fixed keystream offset. Output
//! therefore depends only on `(seed, stream_id, n)`, never on how many threads
//! produced it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{param_h_to_l, point_l_to_h, HyperboloidPoint, LorentzParam, SpdParam2, UpperHalfPoint};
use crate::optim::bisect;
use crate::scalar::Real;

/// Draws per independently seekable block.
pub const BLOCK_SIZE: usize = 1 << 14;

/// Named random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A sibling stream for a different purpose under the same seed.
    pub fn substream(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id.wrapping_add(1)),
        }
    }

    /// Generator positioned at the start of `block`.
    pub fn block_rng(&self, block: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((block as u128) << 40);
        rng
    }

    /// Runs `f(block_rng, len)` for each block covering `n` draws, in parallel,
    /// and concatenates the outputs in block order.
    pub fn generate<X, F>(&self, n: usize, f: F) -> Vec<X>
    where
        X: Send,
        F: Fn(&mut ChaCha20Rng, usize) -> Vec<X> + Sync,
    {
        let blocks = n.div_ceil(BLOCK_SIZE);
        let parts: Vec<Vec<X>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let len = BLOCK_SIZE.min(n - b * BLOCK_SIZE);
                let mut rng = self.block_rng(b as u64);
                f(&mut rng, len)
            })
            .collect();
        parts.into_iter().flatten().collect()
    }
}

/// Uniform on the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal variates by the Marsaglia polar method.
#[derive(Debug, Default, Clone)]
pub struct PolarNormal {
    spare: Option<f64>,
}

impl PolarNormal {
    pub fn new() -> Self {
        Self { spare: None }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * rng.gen::<f64>() - 1.0;
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * k);
                return u * k;
            }
        }
    }
}

/// Generalized inverse Gaussian law with density `∝ x^{λ−1} exp(−(χ/x + ψx)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub lambda: f64,
    pub chi: f64,
    pub psi: f64,
}

impl GigParams {
    pub fn new(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite() && psi > 0.0 && psi.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "GIG needs finite lambda and chi, psi > 0 (got lambda = {lambda}, chi = {chi}, psi = {psi})"
            )));
        }
        Ok(Self { lambda, chi, psi })
    }

    /// `E[X] = √(χ/ψ) K_{λ+1}(ω)/K_λ(ω)` with `ω = √(χψ)`.
    pub fn mean(&self) -> f64 {
        let omega = (self.chi * self.psi).sqrt();
        let ratio = crate::specfun::bessel_k_ratio(self.lambda, omega).unwrap();
        (self.chi / self.psi).sqrt() * ratio
    }
}

/// Single-variate GIG generator with precomputed constants.
#[derive(Debug, Clone)]
pub struct GigSampler {
    params: GigParams,
    kind: GigKind,
}

#[derive(Debug, Clone)]
enum GigKind {
    /// `λ = ±½`: inverse Gaussian with mean `mu` and shape `shape`, reciprocal if `invert`.
    InverseGaussian { mu: f64, shape: f64, invert: bool },
    /// Ratio of uniforms with mode shift on `x^{λ−1} exp(−ω(x + 1/x)/2)`, `λ ≥ 0`.
    Rou {
        lambda: f64,
        omega: f64,
        mode: f64,
        log_g_mode: f64,
        v_lo: f64,
        v_hi: f64,
        scale: f64,
        invert: bool,
    },
}

impl GigSampler {
    pub fn new(params: GigParams) -> Self {
        let GigParams { lambda, chi, psi } = params;
        let kind = if lambda == 0.5 {
            GigKind::InverseGaussian {
                mu: (psi / chi).sqrt(),
                shape: psi,
                invert: true,
            }
        } else if lambda == -0.5 {
            GigKind::InverseGaussian {
                mu: (chi / psi).sqrt(),
                shape: chi,
                invert: false,
            }
        } else {
            Self::rou(lambda, chi, psi)
        };
        Self { params, kind }
    }

    /// Forces the ratio-of-uniforms path (used to cross-check the closed-form path).
    pub fn new_rejection(params: GigParams) -> Self {
        Self {
            params,
            kind: Self::rou(params.lambda, params.chi, params.psi),
        }
    }

    pub fn params(&self) -> GigParams {
        self.params
    }

    fn rou(lambda: f64, chi: f64, psi: f64) -> GigKind {
        // X ~ GIG(λ, χ, ψ) ⇔ 1/X ~ GIG(−λ, ψ, χ).
        let (lam, invert) = if lambda < 0.0 { (-lambda, true) } else { (lambda, false) };
        let omega = (chi * psi).sqrt();
        let scale = if invert { (psi / chi).sqrt() } else { (chi / psi).sqrt() };
        let lm1 = lam - 1.0;
        let mode = (lm1 + (lm1 * lm1 + omega * omega).sqrt()) / omega;
        let log_g = |x: f64| lm1 * x.ln() - 0.5 * omega * (x + 1.0 / x);
        let log_g_mode = log_g(mode);
        // Extremes of (x − m)√g(x) are the roots of
        // x³ − (m + 2(λ+1)/ω)x² + (2m(λ−1)/ω − 1)x + m on (0, m) and (m, ∞).
        let cubic = |x: f64| {
            x * x * x - (mode + 2.0 * (lam + 1.0) / omega) * x * x + (2.0 * mode * lm1 / omega - 1.0) * x + mode
        };
        let x_lo = bisect(cubic, 0.0, mode, 200);
        let mut hi = 2.0 * mode + 1.0;
        while cubic(hi) < 0.0 {
            hi *= 2.0;
        }
        let x_hi = bisect(cubic, mode, hi, 200);
        let v = |x: f64| (x - mode) * (0.5 * (log_g(x) - log_g_mode)).exp();
        GigKind::Rou {
            lambda: lam,
            omega,
            mode,
            log_g_mode,
            v_lo: v(x_lo),
            v_hi: v(x_hi),
            scale,
            invert,
        }
    }

    /// Draws one variate; returns it together with the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, normal: &mut PolarNormal) -> (f64, u32) {
        match self.kind {
            GigKind::InverseGaussian { mu, shape, invert } => {
                let nu = normal.sample(rng);
                let y = nu * nu;
                let a = mu * y / (2.0 * shape);
                let x = mu / (1.0 + a + (a * (a + 2.0)).sqrt());
                let ig = if open_unit(rng) * (mu + x) <= mu { x } else { mu * mu / x };
                (if invert { 1.0 / ig } else { ig }, 1)
            }
            GigKind::Rou {
                lambda,
                omega,
                mode,
                log_g_mode,
                v_lo,
                v_hi,
                scale,
                invert,
            } => {
                let mut tries = 0;
                loop {
                    tries += 1;
                    let u = open_unit(rng);
                    let v = v_lo + (v_hi - v_lo) * rng.gen::<f64>();
                    let x = v / u + mode;
                    if x <= 0.0 {
                        continue;
                    }
                    let log_g = (lambda - 1.0) * x.ln() - 0.5 * omega * (x + 1.0 / x);
                    if 2.0 * u.ln() <= log_g - log_g_mode {
                        let s = if invert { 1.0 / x } else { x };
                        return (s * scale, tries);
                    }
                }
            }
        }
    }
}

/// `n` i.i.d. GIG draws.
pub fn gig_sample(p: GigParams, n: usize, rng: &RngStream) -> Vec<f64> {
    gig_sample_with_acceptance(p, n, rng).0
}

/// As [`gig_sample`], also returning the empirical acceptance probability.
pub fn gig_sample_with_acceptance(p: GigParams, n: usize, rng: &RngStream) -> (Vec<f64>, f64) {
    run_gig(&GigSampler::new(p), n, rng)
}

/// Draws through the ratio-of-uniforms sampler regardless of `λ`.
pub fn gig_sample_rejection(p: GigParams, n: usize, rng: &RngStream) -> (Vec<f64>, f64) {
    run_gig(&GigSampler::new_rejection(p), n, rng)
}

fn run_gig(sampler: &GigSampler, n: usize, rng: &RngStream) -> (Vec<f64>, f64) {
    let draws = rng.generate(n, |r, len| {
        let mut normal = PolarNormal::new();
        (0..len).map(|_| sampler.sample(r, &mut normal)).collect()
    });
    let tries: u64 = draws.iter().map(|&(_, t)| t as u64).sum();
    let acceptance = if tries == 0 { 1.0 } else { n as f64 / tries as f64 };
    (draws.into_iter().map(|(x, _)| x).collect(), acceptance)
}

/// Planar hyperboloid sampler: `s ~ GIG(½, 1, |θ|²)`, `x ~ N(s(θ₁, θ₂), s I₂)`.
#[derive(Debug, Clone)]
pub struct HyperboloidSampler {
    gig: GigSampler,
    t1: f64,
    t2: f64,
}

impl HyperboloidSampler {
    pub fn new<T: Real>(theta: &LorentzParam<T>) -> Result<Self> {
        if theta.d != 2 {
            return Err(Error::UnsupportedDimension(theta.d));
        }
        let t = theta.minkowski_norm().to_f64_lossy();
        let gig = GigSampler::new(GigParams::new(0.5, 1.0, t * t)?);
        Ok(Self {
            gig,
            t1: theta.theta[1].to_f64_lossy(),
            t2: theta.theta[2].to_f64_lossy(),
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, normal: &mut PolarNormal) -> (f64, f64) {
        let (s, _) = self.gig.sample(rng, normal);
        let sd = s.sqrt();
        let x1 = s * self.t1 + sd * normal.sample(rng);
        let x2 = s * self.t2 + sd * normal.sample(rng);
        (x1, x2)
    }
}

/// `n` chart points from `P_θ` on 𝕃² as raw `(x₁, x₂)` pairs.
pub fn hyperboloid_sample_raw<T: Real>(theta: &LorentzParam<T>, n: usize, rng: &RngStream) -> Result<Vec<(f64, f64)>> {
    let sampler = HyperboloidSampler::new(theta)?;
    Ok(rng.generate(n, |r, len| {
        let mut normal = PolarNormal::new();
        (0..len).map(|_| sampler.sample(r, &mut normal)).collect()
    }))
}

/// `n` chart points from `P_θ` on 𝕃² (only `d = 2` is supported).
pub fn hyperboloid_sample<T: Real>(
    theta: &LorentzParam<T>,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<HyperboloidPoint<T>>> {
    Ok(hyperboloid_sample_raw(theta, n, rng)?
        .into_iter()
        .map(|(a, b)| HyperboloidPoint::planar(T::of(a), T::of(b)))
        .collect())
}

/// Hyperboloid parameter whose law maps to `p_θ` under [`point_l_to_h`].
///
/// The chart map satisfies `[θ_𝕃, x̃] = (a(x²+y²) + c − 2bx)/y` with
/// `θ_𝕃 = param_h_to_l(θ)`, so the sign of `b` is reflected before sampling.
pub fn sampling_param_for<T: Real>(theta: &SpdParam2<T>) -> LorentzParam<T> {
    let reflected = SpdParam2 {
        a: theta.a,
        b: -theta.b,
        c: theta.c,
    };
    param_h_to_l(&reflected)
}

/// `n` points from `p_θ` on the upper half-plane.
pub fn poincare_sample<T: Real>(theta: &SpdParam2<T>, n: usize, rng: &RngStream) -> Result<Vec<UpperHalfPoint<T>>> {
    let theta = SpdParam2::new(theta.a, theta.b, theta.c)?;
    let lp = sampling_param_for(&theta);
    hyperboloid_sample(&lp, n, rng)?
        .iter()
        .map(point_l_to_h)
        .collect()
}

/// Mean chart point of `n` draws from `P_{t θ̃}`, where `θ̃` is the lift of `chart`.
pub fn concentration_probe<T: Real>(chart: &HyperboloidPoint<T>, t: T, n: usize, rng: &RngStream) -> Result<Vec<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidArgument(format!("concentration scale must be positive, got {t}")));
    }
    let lift = chart.lift();
    let theta = LorentzParam::new(lift.iter().map(|&v| t * v).collect())?;
    let raw = hyperboloid_sample_raw(&theta, n, rng)?;
    let (mut s1, mut s2) = (crate::scalar::CompensatedSum::new(), crate::scalar::CompensatedSum::new());
    for &(a, b) in &raw {
        s1.add(a);
        s2.add(b);
    }
    let nf = n.max(1) as f64;
    Ok(vec![T::of(s1.value() / nf), T::of(s2.value() / nf)])
}
