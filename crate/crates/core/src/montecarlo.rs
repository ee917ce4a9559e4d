//! Monte Carlo estimators of f-divergences between planar hyperboloid
//! distributions (and, through the correspondence, Poincaré distributions).
//!
//! Three estimators are provided:
//!
//! * plug-in: average `f(p_θ′/p_θ)` over draws from `P_θ`;
//! * importance sampling (MC1): average `H/(p_σ ⊗ p_σ)` over a product proposal
//!   of scale σ, where `H = p_θ f(p_θ′/p_θ)` in chart coordinates;
//! * polar change of variables (MC2): map the unit disk onto the chart by
//!   `ρ = r/√(1 − r²)` and average over uniform `(r, ζ)`.
//!
//! Everything here runs in `f64`. Draws are organised in blocks (see
//! [`crate::sampling::RngStream`]) whose statistics are merged in block order,
//! so estimates do not depend on the number of worker threads.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{param_h_to_l, LorentzParam, SpdParam2};
use crate::hyperboloid;
use crate::optim::golden_max;
use crate::poincare;
use crate::sampling::{open_unit, HyperboloidSampler, PolarNormal, RngStream};

/// Stream identifiers for the separate purposes a single seed feeds.
pub mod streams {
    pub const SAMPLING: u64 = 1;
    pub const PILOT: u64 = 2;
    pub const ESTIMATION: u64 = 3;
}

/// A user-supplied generator.
#[derive(Clone)]
pub struct CustomGenerator {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("CustomGenerator").field("name", &self.name).finish()
    }
}

/// Convex generator `f` with `f(1) = 0`; `D_f[p : q] = ∫ p f(q/p)`.
#[derive(Debug, Clone)]
pub enum FGenerator {
    /// `|u − 1|/2`.
    TotalVariation,
    /// `−log u`.
    Kl,
    /// `(√u − 1)²/2`.
    SquaredHellinger,
    /// `(u − 1)²`.
    NeymanChi2,
    Custom(CustomGenerator),
}

impl FGenerator {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(CustomGenerator {
            name: name.into(),
            f: Arc::new(f),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Self::TotalVariation => "tv",
            Self::Kl => "kl",
            Self::SquaredHellinger => "hellinger",
            Self::NeymanChi2 => "neyman",
            Self::Custom(c) => &c.name,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::TotalVariation => 0.5 * (u - 1.0).abs(),
            Self::Kl => -u.ln(),
            Self::SquaredHellinger => 0.5 * (u.sqrt() - 1.0).powi(2),
            Self::NeymanChi2 => (u - 1.0).powi(2),
            Self::Custom(c) => (c.f)(u),
        }
    }

    /// `f(exp(lq − lp))`.
    fn ratio_value(&self, lp: f64, lq: f64) -> f64 {
        let d = lq - lp;
        match self {
            Self::TotalVariation => 0.5 * d.exp_m1().abs(),
            Self::Kl => -d,
            Self::SquaredHellinger => 0.5 * (0.5 * d).exp_m1().powi(2),
            Self::NeymanChi2 => d.exp_m1().powi(2),
            Self::Custom(c) => (c.f)(d.exp()),
        }
    }

    /// `H = p f(q/p)` as `(m, h)` with `H = eᵐ h`.
    fn scaled_h(&self, lp: f64, lq: f64) -> (f64, f64) {
        let m = lp.max(lq);
        match self {
            Self::TotalVariation => (m, 0.5 * ((lq - m).exp() - (lp - m).exp()).abs()),
            Self::Kl => (lp, lp - lq),
            Self::SquaredHellinger => (m, 0.5 * ((0.5 * (lq - m)).exp() - (0.5 * (lp - m)).exp()).powi(2)),
            Self::NeymanChi2 => (2.0 * m - lp, ((lq - m).exp() - (lp - m).exp()).powi(2)),
            Self::Custom(c) => (lp, (c.f)((lq - lp).exp())),
        }
    }

    /// Closed-form value between hyperboloid parameters when one exists.
    pub fn closed_form(&self, theta: &LorentzParam<f64>, theta2: &LorentzParam<f64>) -> Option<f64> {
        match self {
            Self::Kl => hyperboloid::kld(theta, theta2).ok(),
            Self::SquaredHellinger => hyperboloid::hellinger_sq(theta, theta2).ok(),
            Self::NeymanChi2 => hyperboloid::neyman_chi2(theta, theta2).ok(),
            _ => None,
        }
    }

    /// Closed-form value between Poincaré parameters when one exists.
    pub fn closed_form_poincare(&self, theta: &SpdParam2<f64>, theta2: &SpdParam2<f64>) -> Option<f64> {
        match self {
            Self::Kl => Some(poincare::kld(theta, theta2)),
            Self::SquaredHellinger => Some(poincare::hellinger_sq(theta, theta2)),
            Self::NeymanChi2 => Some(poincare::neyman_chi2(theta, theta2)),
            _ => None,
        }
    }
}

/// Standardized proposal family for importance sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Logistic,
    StudentT7,
}

/// `ln(16/(5π√7))`, the log normalizer of Student's t with 7 degrees of freedom.
const LN_T7_NORM: f64 = -0.954_534_150_571_376;

impl ProposalKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::StudentT7 => "student_t7",
        }
    }

    /// Log density at unit scale.
    #[inline]
    pub fn log_pdf(&self, z: f64) -> f64 {
        match self {
            Self::Logistic => {
                let a = z.abs();
                -a - 2.0 * (-a).exp().ln_1p()
            }
            Self::StudentT7 => LN_T7_NORM - 4.0 * (z * z / 7.0).ln_1p(),
        }
    }

    /// Draw at unit scale.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, normal: &mut PolarNormal) -> f64 {
        match self {
            Self::Logistic => {
                let u = open_unit(rng);
                (u / (1.0 - u)).ln()
            }
            Self::StudentT7 => {
                let z = normal.sample(rng);
                let mut v = 0.0;
                for _ in 0..7 {
                    let g = normal.sample(rng);
                    v += g * g;
                }
                z / (v / 7.0).sqrt()
            }
        }
    }
}

/// Scale family `p_σ(x) = p(x/σ)/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub sigma: f64,
}

impl Proposal {
    pub fn new(kind: ProposalKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("proposal scale must be positive, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.kind.log_pdf(x / self.sigma) - self.sigma.ln()
    }
}

/// Estimator choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Plugin,
    /// Importance sampling; `sigma = None` optimizes the scale on a pilot of `n_pilot` draws.
    Mc1 {
        kind: ProposalKind,
        sigma: Option<f64>,
        n_pilot: usize,
    },
    Mc2 {
        eps: f64,
    },
}

impl Method {
    pub const DEFAULT_PILOT: usize = 200_000;
    pub const DEFAULT_EPS: f64 = 1e-4;

    pub fn mc1(kind: ProposalKind) -> Self {
        Self::Mc1 {
            kind,
            sigma: None,
            n_pilot: Self::DEFAULT_PILOT,
        }
    }

    pub fn mc2() -> Self {
        Self::Mc2 { eps: Self::DEFAULT_EPS }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Plugin => "plugin".into(),
            Self::Mc1 { kind, .. } => format!("mc1-{}", kind.name()),
            Self::Mc2 { .. } => "mc2".into(),
        }
    }
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Unbiased (n − 1) sample variance of the per-draw values.
    pub sample_variance: f64,
    pub n: u64,
    pub seed: RngStream,
    /// `estimate ± 1.96 √(sample_variance / n)`.
    pub ci95: (f64, f64),
    /// Grid-probe estimate of `sup |g|`; not a proof.
    pub sup_bound: Option<f64>,
    pub sigma: Option<f64>,
    /// Hill estimate of the tail index of `|g|`; values below 2 suggest infinite variance.
    pub tail_index: Option<f64>,
    pub heavy_tail: bool,
    /// Largest `|g|` seen among the draws.
    pub max_abs: f64,
}

impl McEstimate {
    pub fn std_error(&self) -> f64 {
        (self.sample_variance / self.n as f64).sqrt()
    }
}

/// Streaming mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise update.
    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

const TAIL_KEEP: usize = 2048;

struct BlockStats {
    w: Welford,
    top: Vec<f64>,
    max_abs: f64,
}

impl BlockStats {
    fn from_values(values: &mut [f64]) -> Self {
        let mut w = Welford::default();
        let mut max_abs: f64 = 0.0;
        for v in values.iter_mut() {
            w.push(*v);
            *v = v.abs();
            max_abs = max_abs.max(*v);
        }
        let k = TAIL_KEEP.min(values.len());
        let top = if k == 0 {
            Vec::new()
        } else {
            values.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            values[..k].to_vec()
        };
        Self { w, top, max_abs }
    }
}

/// Hill estimator of the tail index from the `k` largest of `values`.
pub fn hill_tail_index(values: &mut [f64], k: usize) -> Option<f64> {
    if values.len() <= k || k < 10 {
        return None;
    }
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    let xk = values[k];
    if !(xk > 0.0) {
        return None;
    }
    let s: f64 = values[..k].iter().map(|&x| (x / xk).ln()).sum();
    if s > 0.0 {
        Some(k as f64 / s)
    } else {
        None
    }
}

fn summarize(blocks: Vec<BlockStats>, seed: RngStream, sigma: Option<f64>) -> McEstimate {
    let mut w = Welford::default();
    let mut tops = Vec::new();
    let mut max_abs: f64 = 0.0;
    for b in &blocks {
        w.merge(&b.w);
        max_abs = max_abs.max(b.max_abs);
    }
    for b in blocks {
        tops.extend(b.top);
    }
    let n = w.n;
    let k = ((n as f64).sqrt() as usize).min(TAIL_KEEP);
    let tail_index = hill_tail_index(&mut tops, k);
    let var = w.variance();
    let half = 1.96 * (var / n.max(1) as f64).sqrt();
    McEstimate {
        estimate: w.mean,
        sample_variance: var,
        n,
        seed,
        ci95: (w.mean - half, w.mean + half),
        sup_bound: None,
        sigma,
        tail_index,
        heavy_tail: tail_index.is_some_and(|a| a < 2.0),
        max_abs,
    }
}

/// Log densities of a planar parameter pair at chart points.
#[derive(Debug, Clone, Copy)]
struct PairDensity {
    th: [f64; 3],
    th2: [f64; 3],
    lc: f64,
    lc2: f64,
}

impl PairDensity {
    fn new(theta: &LorentzParam<f64>, theta2: &LorentzParam<f64>) -> Result<Self> {
        theta.check_same_dim(theta2)?;
        if theta.d != 2 {
            return Err(Error::UnsupportedDimension(theta.d));
        }
        let arr = |p: &LorentzParam<f64>| [p.theta[0], p.theta[1], p.theta[2]];
        Ok(Self {
            th: arr(theta),
            th2: arr(theta2),
            lc: hyperboloid::log_normalizer(2, theta.minkowski_norm()),
            lc2: hyperboloid::log_normalizer(2, theta2.minkowski_norm()),
        })
    }

    /// `(log p_θ, log p_θ′)` with respect to Lebesgue measure on the chart.
    #[inline]
    fn logs(&self, x1: f64, x2: f64) -> (f64, f64) {
        let x0 = (1.0 + x1 * x1 + x2 * x2).sqrt();
        let lx0 = x0.ln();
        let e = |t: &[f64; 3]| t[0] * x0 - t[1] * x1 - t[2] * x2;
        (self.lc - e(&self.th) - lx0, self.lc2 - e(&self.th2) - lx0)
    }
}

/// Plug-in estimator: mean of `f(p_θ′/p_θ)` over draws from `P_θ`.
pub fn estimate_plugin(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    n: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    Ok(summarize(plugin_blocks(f, theta, theta2, n, rng)?, *rng, None))
}

fn plugin_blocks(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<BlockStats>> {
    let pair = PairDensity::new(theta, theta2)?;
    let sampler = HyperboloidSampler::new(theta)?;
    Ok(rng.generate(n, |r, len| {
        let mut normal = PolarNormal::new();
        let mut vals: Vec<f64> = (0..len)
            .map(|_| {
                let (x1, x2) = sampler.sample(r, &mut normal);
                let (lp, lq) = pair.logs(x1, x2);
                f.ratio_value(lp, lq)
            })
            .collect();
        vec![BlockStats::from_values(&mut vals)]
    }))
}

/// Importance-sampling weight at unit-scale proposal draws `(z, w)`.
#[inline]
fn mc1_weight(f: &FGenerator, pair: &PairDensity, kind: ProposalKind, sigma: f64, z: f64, w: f64) -> f64 {
    let (lp, lq) = pair.logs(sigma * z, sigma * w);
    let (m, h) = f.scaled_h(lp, lq);
    if h == 0.0 {
        return 0.0;
    }
    h * (m + 2.0 * sigma.ln() - kind.log_pdf(z) - kind.log_pdf(w)).exp()
}

/// Importance sampling with a product proposal `p_σ ⊗ p_σ`.
pub fn estimate_mc1(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    proposal: Proposal,
    n: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    let blocks = mc1_blocks(f, theta, theta2, proposal, n, rng)?;
    Ok(summarize(blocks, *rng, Some(proposal.sigma)))
}

fn mc1_blocks(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    proposal: Proposal,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<BlockStats>> {
    let pair = PairDensity::new(theta, theta2)?;
    let Proposal { kind, sigma } = proposal;
    Ok(rng.generate(n, |r, len| {
        let mut normal = PolarNormal::new();
        let mut vals: Vec<f64> = (0..len)
            .map(|_| {
                let z = kind.sample(r, &mut normal);
                let w = kind.sample(r, &mut normal);
                mc1_weight(f, &pair, kind, sigma, z, w)
            })
            .collect();
        vec![BlockStats::from_values(&mut vals)]
    }))
}

const CE_ROUNDS: usize = 12;
const PROBE_ANGLES: usize = 720;
const PROBE_R: (f64, f64) = (1000.0, 2000.0);

/// Smallest proposal scale for which `H²/(p_σ ⊗ p_σ)` still decays along
/// every ray, i.e. below which `Var g` is infinite. Zero when no scale fails.
///
/// Probes the log-integrand slope between two large radii on a ring of
/// directions and bisects in `ln σ`; the slope is monotone in σ.
pub fn sigma_floor(f: &FGenerator, theta: &LorentzParam<f64>, theta2: &LorentzParam<f64>, kind: ProposalKind) -> Result<f64> {
    let pair = PairDensity::new(theta, theta2)?;
    let (r1, r2) = PROBE_R;
    let rays: Vec<(f64, f64, f64, f64)> = (0..PROBE_ANGLES)
        .filter_map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / PROBE_ANGLES as f64;
            let (u1, u2) = (phi.cos(), phi.sin());
            let log_h = |r: f64| {
                let (lp, lq) = pair.logs(r * u1, r * u2);
                let (m, h) = f.scaled_h(lp, lq);
                m + h.abs().ln()
            };
            let (a, b) = (log_h(r1), log_h(r2));
            (a.is_finite() && b.is_finite()).then_some((u1, u2, a, b))
        })
        .collect();
    let diverges = |sigma: f64| {
        let lq = |z: f64| kind.log_pdf(z / sigma) - sigma.ln();
        rays.iter().any(|&(u1, u2, a, b)| {
            let l1 = 2.0 * a - lq(r1 * u1) - lq(r1 * u2);
            let l2 = 2.0 * b - lq(r2 * u1) - lq(r2 * u2);
            l2 >= l1
        })
    };
    let (lo, hi) = (SIGMA_LN_LO, SIGMA_LN_LO + SIGMA_GRID_STEP * SIGMA_GRID_LEN as f64);
    if !diverges(lo.exp()) {
        return Ok(0.0);
    }
    if diverges(hi.exp()) {
        return Err(Error::InvalidArgument("importance weights have infinite variance at every scale".into()));
    }
    let ls = crate::optim::bisect(|g| if diverges(g.exp()) { -1.0 } else { 1.0 }, lo, hi, 60);
    Ok(ls.exp())
}

const SIGMA_LN_LO: f64 = -2.995_732_273_553_991; // ln 0.05
const SIGMA_GRID_STEP: f64 = 0.1;
const SIGMA_GRID_LEN: usize = 70;

/// Proposal scale minimizing the pilot estimate of `E[g²]`.
///
/// Unit-scale draws `(zᵢ, wᵢ)` from the proposal are fixed once. Each round
/// places the pilot at the current scale `s` (points `s zᵢ`, density `p_s`)
/// and minimizes the deterministic objective
/// `σ ↦ mean H² / (p_s p_s p_σ p_σ)` over `σ` above [`sigma_floor`]; the
/// minimizer becomes the next `s`. Starting from `s = 1` and re-centring in
/// this way keeps the pilot in the region that dominates `E[g²]`.
pub fn optimize_sigma(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    kind: ProposalKind,
    n_pilot: usize,
    rng: &RngStream,
) -> Result<f64> {
    if n_pilot < 10_000 {
        return Err(Error::InvalidArgument(format!("pilot size must be at least 10^4, got {n_pilot}")));
    }
    let pair = PairDensity::new(theta, theta2)?;
    let floor = sigma_floor(f, theta, theta2, kind)?;
    let base: Vec<(f64, f64)> = rng.generate(n_pilot, |r, len| {
        let mut normal = PolarNormal::new();
        (0..len).map(|_| (kind.sample(r, &mut normal), kind.sample(r, &mut normal))).collect()
    });
    let mut scale = 1.0f64.max(floor * 1.05);
    for _ in 0..CE_ROUNDS {
        let ln_s = scale.ln();
        let pilot: Vec<(f64, f64, f64)> = base
            .par_chunks(4096)
            .flat_map_iter(|c| {
                c.iter().filter_map(|&(z0, w0)| {
                    let (z, w) = (scale * z0, scale * w0);
                    let (lp, lq) = pair.logs(z, w);
                    let (m, h) = f.scaled_h(lp, lq);
                    if h == 0.0 {
                        return None;
                    }
                    let la = 2.0 * (m + h.abs().ln()) - kind.log_pdf(z0) - kind.log_pdf(w0) + 2.0 * ln_s;
                    la.is_finite().then_some((z, w, la))
                })
            })
            .collect();
        if pilot.is_empty() {
            // H vanishes identically (θ = θ′): every scale is optimal.
            return Ok(1.0);
        }
        let objective = |log_sigma: f64| -> f64 {
            if log_sigma.exp() <= floor {
                return f64::INFINITY;
            }
            let s = log_sigma.exp();
            let partial: Vec<f64> = pilot
                .par_chunks(4096)
                .map(|c| {
                    c.iter()
                        .map(|&(z, w, la)| (la + 2.0 * log_sigma - kind.log_pdf(z / s) - kind.log_pdf(w / s)).exp())
                        .sum::<f64>()
                })
                .collect();
            partial.iter().sum::<f64>() / n_pilot as f64
        };
        // Coarse log grid, then golden section inside the best bracket.
        let grid: Vec<f64> = (0..=SIGMA_GRID_LEN).map(|i| SIGMA_LN_LO + i as f64 * SIGMA_GRID_STEP).collect();
        let vals: Vec<f64> = grid.iter().map(|&g| objective(g)).collect();
        let best = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidArgument("pilot objective is not finite at any scale".into()))?;
        let lo = grid[best.saturating_sub(1)].max(floor.ln());
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (ls, _) = golden_max(|g: f64| -objective(g), lo, hi, 1e-6);
        let done = (ls - ln_s).abs() < 1e-3;
        scale = ls.exp();
        if done {
            break;
        }
    }
    Ok(scale)
}

/// Polar change-of-variables estimator with `r ~ U(0, 1 − eps)`, `ζ ~ U(0, 2π)`.
///
/// The per-draw value includes the interval length `2π(1 − eps)`, so the mean
/// estimates the integral over the truncated disk exactly; the omitted outer
/// ring carries the truncation bias.
pub fn estimate_mc2(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    n: usize,
    rng: &RngStream,
    eps: f64,
) -> Result<McEstimate> {
    Ok(summarize(mc2_blocks(f, theta, theta2, n, rng, eps)?, *rng, None))
}

fn mc2_blocks(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    n: usize,
    rng: &RngStream,
    eps: f64,
) -> Result<Vec<BlockStats>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let pair = PairDensity::new(theta, theta2)?;
    let r_max = 1.0 - eps;
    let log_len = (TAU * r_max).ln();
    Ok(rng.generate(n, |r, len| {
        let mut vals: Vec<f64> = (0..len)
            .map(|_| {
                let rr = r_max * r.gen::<f64>();
                let zeta = TAU * r.gen::<f64>();
                mc2_value(f, &pair, rr, zeta, log_len)
            })
            .collect();
        vec![BlockStats::from_values(&mut vals)]
    }))
}

#[inline]
fn mc2_value(f: &FGenerator, pair: &PairDensity, r: f64, zeta: f64, log_len: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let one_m = (1.0 - r) * (1.0 + r);
    let rho = r / one_m.sqrt();
    let (s, c) = zeta.sin_cos();
    let (lp, lq) = pair.logs(rho * c, rho * s);
    let (m, h) = f.scaled_h(lp, lq);
    if h == 0.0 {
        return 0.0;
    }
    h * (m + log_len + r.ln() - 2.0 * one_m.ln()).exp()
}

/// Dispatches to the chosen estimator. For MC1 without a fixed σ the scale is
/// optimized on the pilot stream derived from `rng`.
pub fn estimate(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    method: &Method,
    n: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    match *method {
        Method::Plugin => estimate_plugin(f, theta, theta2, n, rng),
        Method::Mc1 { kind, sigma, n_pilot } => {
            let sigma = match sigma {
                Some(s) => s,
                None => optimize_sigma(f, theta, theta2, kind, n_pilot, &pilot_stream(rng))?,
            };
            estimate_mc1(f, theta, theta2, Proposal::new(kind, sigma)?, n, rng)
        }
        Method::Mc2 { eps } => estimate_mc2(f, theta, theta2, n, rng, eps),
    }
}

/// Offset of shard stream ids, far from the pilot substream.
const SHARD_BASE: u64 = 1 << 32;

/// Stream of shard `k` out of `shards`. A single shard uses `rng` itself.
pub fn shard_stream(rng: &RngStream, k: usize, shards: usize) -> RngStream {
    if shards <= 1 {
        *rng
    } else {
        rng.substream(SHARD_BASE + k as u64)
    }
}

/// [`estimate`] with the `n` draws split over `shards` independent streams
/// (sizes differ by at most one) and merged in shard order. MC1 scale
/// optimization always uses the pilot stream of `rng`, so the shard count never
/// changes the σ chosen. With `shards = 1` this equals [`estimate`].
pub fn estimate_sharded(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    method: &Method,
    n: usize,
    rng: &RngStream,
    shards: usize,
) -> Result<McEstimate> {
    if shards == 0 || shards > n.max(1) {
        return Err(Error::InvalidArgument(format!("shard count must lie in 1..={}, got {shards}", n.max(1))));
    }
    let sigma = match *method {
        Method::Mc1 { kind, sigma, n_pilot } => Some(match sigma {
            Some(s) => s,
            None => optimize_sigma(f, theta, theta2, kind, n_pilot, &pilot_stream(rng))?,
        }),
        _ => None,
    };
    let mut blocks = Vec::new();
    for k in 0..shards {
        let len = n / shards + usize::from(k < n % shards);
        let r = shard_stream(rng, k, shards);
        blocks.extend(match *method {
            Method::Plugin => plugin_blocks(f, theta, theta2, len, &r)?,
            Method::Mc1 { kind, .. } => mc1_blocks(f, theta, theta2, Proposal::new(kind, sigma.unwrap_or(1.0))?, len, &r)?,
            Method::Mc2 { eps } => mc2_blocks(f, theta, theta2, len, &r, eps)?,
        });
    }
    Ok(summarize(blocks, *rng, sigma))
}

/// Pilot stream paired with an estimation stream.
pub fn pilot_stream(rng: &RngStream) -> RngStream {
    rng.substream(streams::PILOT)
}

/// Runs `method` on the hyperboloid images `param_h_to_l(θ)`, `param_h_to_l(θ′)`.
pub fn estimate_for_poincare(
    f: &FGenerator,
    theta: &SpdParam2<f64>,
    theta2: &SpdParam2<f64>,
    method: &Method,
    n: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    let a = SpdParam2::new(theta.a, theta.b, theta.c)?;
    let b = SpdParam2::new(theta2.a, theta2.b, theta2.c)?;
    estimate(f, &param_h_to_l(&a), &param_h_to_l(&b), method, n, rng)
}

/// `2 min{s²/(s² + 4nt²), exp(−nt²/s²)}` for `s = sup |g|`.
pub fn error_bound(sup_bound: f64, n: u64, t: f64) -> Result<f64> {
    if !(sup_bound > 0.0 && sup_bound.is_finite()) || n == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "error bound needs sup > 0, n >= 1, t > 0 (got {sup_bound}, {n}, {t})"
        )));
    }
    let s2 = sup_bound * sup_bound;
    let nt2 = n as f64 * t * t;
    Ok(2.0 * (s2 / (s2 + 4.0 * nt2)).min((-nt2 / s2).exp()))
}

/// Grid estimate of `sup |g|` for the integrand of `method`, on a `grid × grid`
/// lattice: chart box `[−L, L]²` (plug-in), unit-scale proposal box (MC1), or
/// the truncated polar rectangle (MC2). This is a probe, not a bound.
pub fn sup_probe(
    f: &FGenerator,
    theta: &LorentzParam<f64>,
    theta2: &LorentzParam<f64>,
    method: &Method,
    sigma: Option<f64>,
    grid: usize,
) -> Result<f64> {
    let pair = PairDensity::new(theta, theta2)?;
    let grid = grid.max(2);
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid - 1) as f64;
    let rows: Vec<f64> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let mut m: f64 = 0.0;
            for j in 0..grid {
                let v = match *method {
                    Method::Plugin => {
                        let (lp, lq) = pair.logs(lin(-25.0, 25.0, i), lin(-25.0, 25.0, j));
                        f.ratio_value(lp, lq)
                    }
                    Method::Mc1 { kind, sigma: s, .. } => {
                        let s = s.or(sigma).unwrap_or(1.0);
                        mc1_weight(f, &pair, kind, s, lin(-40.0, 40.0, i), lin(-40.0, 40.0, j))
                    }
                    Method::Mc2 { eps } => {
                        let r_max = 1.0 - eps;
                        mc2_value(f, &pair, lin(0.0, r_max, i), lin(0.0, TAU, j), (TAU * r_max).ln())
                    }
                };
                if v.is_finite() {
                    m = m.max(v.abs());
                } else {
                    m = f64::INFINITY;
                }
            }
            m
        })
        .collect();
    Ok(rows.into_iter().fold(0.0, f64::max))
}
