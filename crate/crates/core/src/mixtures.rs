//! Finite mixtures of Poincaré or hyperboloid components and EM fitting.
//!
//! EM here is Bregman soft clustering in the sufficient-statistic space: the
//! E-step weighs each point by `w_k p_{θ_k}`, the M-step averages statistics
//! under the responsibilities and maps the average back with `∇F*`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HyperboloidPoint, LorentzParam, Moment2, SpdParam2, UpperHalfPoint};
use crate::sampling::{hyperboloid_sample, open_unit, poincare_sample, RngStream};
use crate::scalar::{CompensatedSum, Real};
use crate::{hyperboloid, poincare};

/// Which exponential family the components belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poincare,
    /// Hyperboloid family on 𝕃^d.
    Hyperboloid(usize),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Poincare => "poincare",
            Self::Hyperboloid(_) => "hyperboloid",
        }
    }

    /// Dimension of the sample space.
    pub fn dim(&self) -> usize {
        match self {
            Self::Poincare => 2,
            Self::Hyperboloid(d) => *d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component<T> {
    Poincare(SpdParam2<T>),
    Hyperboloid(LorentzParam<T>),
}

impl<T: Real> Component<T> {
    pub fn family(&self) -> Family {
        match self {
            Self::Poincare(_) => Family::Poincare,
            Self::Hyperboloid(p) => Family::Hyperboloid(p.d),
        }
    }

    pub fn log_density(&self, x: &Point<T>) -> Result<T> {
        match (self, x) {
            (Self::Poincare(th), Point::UpperHalf(z)) => Ok(poincare::log_density(th, z)),
            (Self::Hyperboloid(th), Point::Hyperboloid(p)) => hyperboloid::log_density(th, p),
            _ => Err(Error::InvalidArgument(format!(
                "{} component cannot evaluate a {} point",
                self.family().name(),
                x.family_name()
            ))),
        }
    }

    /// Mean of the sufficient statistic, flattened.
    pub fn moments(&self) -> Vec<T> {
        match self {
            Self::Poincare(th) => {
                let m = poincare::grad_cumulant(th);
                vec![m.p, m.q, m.r]
            }
            Self::Hyperboloid(th) => hyperboloid::grad_cumulant(th),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point<T> {
    UpperHalf(UpperHalfPoint<T>),
    Hyperboloid(HyperboloidPoint<T>),
}

impl<T: Real> Point<T> {
    fn family_name(&self) -> &'static str {
        match self {
            Self::UpperHalf(_) => "poincare",
            Self::Hyperboloid(_) => "hyperboloid",
        }
    }

    fn matches(&self, family: Family) -> bool {
        match (self, family) {
            (Self::UpperHalf(_), Family::Poincare) => true,
            (Self::Hyperboloid(p), Family::Hyperboloid(d)) => p.dim() == d,
            _ => false,
        }
    }

    /// Sufficient statistic, flattened (`(p, q, r)` for Poincaré points).
    pub fn statistic(&self) -> Vec<T> {
        match self {
            Self::UpperHalf(z) => z.sufficient_stat().to_vec(),
            Self::Hyperboloid(p) => p.sufficient_stat(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture<T> {
    pub family: Family,
    pub weights: Vec<T>,
    pub components: Vec<Component<T>>,
}

impl<T: Real> Mixture<T> {
    pub fn new(family: Family, weights: Vec<T>, components: Vec<Component<T>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::InvalidArgument("mixture weights must be nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-12) {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        if let Some(c) = components.iter().find(|c| c.family() != family) {
            return Err(Error::InvalidArgument(format!(
                "component family {:?} does not match mixture family {:?}",
                c.family(),
                family
            )));
        }
        Ok(Self {
            family,
            weights,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// `Σ w_k ∇F(θ_k)`, the mean sufficient statistic.
    pub fn moments(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for (w, c) in self.weights.iter().zip(&self.components) {
            let m = c.moments();
            if out.is_empty() {
                out = vec![T::zero(); m.len()];
            }
            for (o, v) in out.iter_mut().zip(m) {
                *o = *o + *w * v;
            }
        }
        out
    }
}

/// `log Σ w_k p_{θ_k}(x)` by log-sum-exp.
pub fn mixture_log_density<T: Real>(m: &Mixture<T>, x: &Point<T>) -> Result<T> {
    if !x.matches(m.family) {
        return Err(Error::InvalidArgument(format!(
            "point does not belong to the {:?} family",
            m.family
        )));
    }
    let mut terms = Vec::with_capacity(m.k());
    for (w, c) in m.weights.iter().zip(&m.components) {
        terms.push(w.ln() + c.log_density(x)?);
    }
    Ok(log_sum_exp(&terms))
}

/// Total log-likelihood `Σᵢ log m(xᵢ)`.
pub fn mixture_log_likelihood<T: Real>(m: &Mixture<T>, points: &[Point<T>]) -> Result<T> {
    let per: Vec<T> = points
        .par_iter()
        .map(|x| mixture_log_density(m, x))
        .collect::<Result<_>>()?;
    let mut s = CompensatedSum::new();
    for v in per {
        s.add(v);
    }
    Ok(s.value())
}

fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let hi = v.iter().copied().fold(T::neg_infinity(), T::max);
    if hi == T::neg_infinity() {
        return hi;
    }
    let s: T = v.iter().map(|&x| (x - hi).exp()).sum();
    hi + s.ln()
}

/// Ancestral sampling. Labels come from one substream; component `j` draws
/// its share from substream `j + 1`, consumed in label order.
pub fn mixture_sample_labeled<T: Real>(m: &Mixture<T>, n: usize, rng: &RngStream) -> Result<(Vec<usize>, Vec<Point<T>>)> {
    if let Family::Hyperboloid(d) = m.family {
        if d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
    }
    let cdf: Vec<f64> = m
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w.to_f64_lossy();
            Some(*acc)
        })
        .collect();
    let last = m.k() - 1;
    let labels: Vec<usize> = rng.substream(0).generate(n, |r, len| {
        (0..len)
            .map(|_| {
                let u: f64 = r.gen::<f64>() * cdf[last];
                // Zero-weight components are never selected.
                cdf.iter()
                    .position(|&c| u < c)
                    .unwrap_or(last)
            })
            .collect()
    });
    let mut counts = vec![0usize; m.k()];
    for &l in &labels {
        counts[l] += 1;
    }
    let mut pools: Vec<std::vec::IntoIter<Point<T>>> = Vec::with_capacity(m.k());
    for (j, (c, &cnt)) in m.components.iter().zip(&counts).enumerate() {
        let sub = rng.substream(j as u64 + 1);
        let pts: Vec<Point<T>> = match c {
            Component::Poincare(th) => poincare_sample(th, cnt, &sub)?.into_iter().map(Point::UpperHalf).collect(),
            Component::Hyperboloid(th) => hyperboloid_sample(th, cnt, &sub)?
                .into_iter()
                .map(Point::Hyperboloid)
                .collect(),
        };
        pools.push(pts.into_iter());
    }
    let points = labels
        .iter()
        .map(|&l| pools[l].next().expect("pool sized by label count"))
        .collect();
    Ok((labels, points))
}

pub fn mixture_sample<T: Real>(m: &Mixture<T>, n: usize, rng: &RngStream) -> Result<Vec<Point<T>>> {
    Ok(mixture_sample_labeled(m, n, rng)?.1)
}

/// Per-iteration record of an EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace<T> {
    /// Average log-likelihood after each E-step, starting from the initial fit.
    pub avg_loglik: Vec<T>,
    /// Effective number of points per component at the end.
    pub effective_counts: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Initializations discarded because a component collapsed.
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            max_restarts: 10,
        }
    }
}

/// EM with k-means++ seeding in statistic space and the default options.
pub fn em_fit<T: Real>(points: &[Point<T>], k: usize, family: Family, rng: &RngStream) -> Result<(Mixture<T>, EmTrace<T>)> {
    em_fit_with(points, k, family, rng, EmOptions::default())
}

pub fn em_fit_with<T: Real>(
    points: &[Point<T>],
    k: usize,
    family: Family,
    rng: &RngStream,
    opts: EmOptions,
) -> Result<(Mixture<T>, EmTrace<T>)> {
    check_points(points, family)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let distinct = count_distinct(points, 2 * k);
    if distinct < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "EM with k = {k} needs at least {} distinct points, got {distinct}",
            2 * k
        )));
    }
    let stats: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.statistic().iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let mut last_err = None;
    for attempt in 0..=opts.max_restarts {
        let mut r = rng.substream(attempt as u64).block_rng(0);
        let labels = kmeans_pp_labels(&stats, k, &mut r);
        let resp: Vec<Vec<T>> = labels
            .iter()
            .map(|&l| (0..k).map(|j| if j == l { T::one() } else { T::zero() }).collect())
            .collect();
        match em_from_responsibilities(points, family, resp, opts) {
            Ok((m, mut trace)) => {
                trace.restarts = attempt;
                return Ok((m, trace));
            }
            Err(e @ Error::EmFailure(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::EmFailure(format!(
        "no initialization survived after {} restarts: {}",
        opts.max_restarts,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// EM started from given responsibilities (rows: points, columns: components).
///
/// A component whose effective count drops below 2, or whose averaged
/// statistic leaves the dual domain, is reported as [`Error::EmFailure`].
pub fn em_from_responsibilities<T: Real>(
    points: &[Point<T>],
    family: Family,
    mut resp: Vec<Vec<T>>,
    opts: EmOptions,
) -> Result<(Mixture<T>, EmTrace<T>)> {
    check_points(points, family)?;
    if resp.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: resp.len(),
        });
    }
    let k = resp.first().map_or(0, Vec::len);
    if k == 0 || resp.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument("responsibility rows must share a nonzero width".into()));
    }
    let stats: Vec<Vec<T>> = points.iter().map(Point::statistic).collect();
    let n = T::from_usize(points.len()).expect("count fits in scalar");
    let mut trace = EmTrace {
        avg_loglik: Vec::new(),
        effective_counts: Vec::new(),
        iterations: 0,
        converged: false,
        restarts: 0,
    };
    let mut model = m_step(&stats, &resp, family, n)?;
    loop {
        let (new_resp, ll) = e_step(&model, points)?;
        resp = new_resp;
        let avg = ll / n;
        let prev = trace.avg_loglik.last().copied();
        trace.avg_loglik.push(avg);
        if let Some(p) = prev {
            if (avg - p).abs() < T::of(opts.tol) {
                trace.converged = true;
                break;
            }
        }
        if trace.iterations >= opts.max_iter {
            break;
        }
        model = m_step(&stats, &resp, family, n)?;
        trace.iterations += 1;
    }
    trace.effective_counts = column_sums(&resp, k);
    Ok((model, trace))
}

fn check_points<T: Real>(points: &[Point<T>], family: Family) -> Result<()> {
    if let Some(p) = points.iter().find(|p| !p.matches(family)) {
        return Err(Error::InvalidArgument(format!(
            "a {} point does not belong to the {:?} family",
            p.family_name(),
            family
        )));
    }
    Ok(())
}

fn count_distinct<T: Real>(points: &[Point<T>], enough: usize) -> usize {
    let mut seen: Vec<&Point<T>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
            if seen.len() >= enough {
                break;
            }
        }
    }
    seen.len()
}

fn column_sums<T: Real>(resp: &[Vec<T>], k: usize) -> Vec<T> {
    (0..k)
        .map(|j| {
            let mut s = CompensatedSum::new();
            for r in resp {
                s.add(r[j]);
            }
            s.value()
        })
        .collect()
}

fn m_step<T: Real>(stats: &[Vec<T>], resp: &[Vec<T>], family: Family, n: T) -> Result<Mixture<T>> {
    let k = resp[0].len();
    let counts = column_sums(resp, k);
    let mut weights = Vec::with_capacity(k);
    let mut comps = Vec::with_capacity(k);
    for (j, &nj) in counts.iter().enumerate() {
        if !(nj >= T::two()) {
            return Err(Error::EmFailure(format!("component {j} collapsed (effective count {nj})")));
        }
        let dim = stats[0].len();
        let mut sums = vec![CompensatedSum::new(); dim];
        for (t, r) in stats.iter().zip(resp) {
            for (s, &v) in sums.iter_mut().zip(t) {
                s.add(r[j] * v);
            }
        }
        let eta: Vec<T> = sums.iter().map(|s| s.value() / nj).collect();
        let comp = match family {
            Family::Poincare => poincare::grad_conjugate(&Moment2::new(eta[0], eta[1], eta[2])).map(Component::Poincare),
            Family::Hyperboloid(_) => hyperboloid::grad_conjugate(&eta).map(Component::Hyperboloid),
        }
        .map_err(|e| Error::EmFailure(format!("component {j}: {e}")))?;
        weights.push(nj / n);
        comps.push(comp);
    }
    // Renormalize so the weights sum to one despite rounding.
    let total: T = weights.iter().copied().sum();
    for w in &mut weights {
        *w = *w / total;
    }
    Mixture::new(family, weights, comps)
}

fn e_step<T: Real>(m: &Mixture<T>, points: &[Point<T>]) -> Result<(Vec<Vec<T>>, T)> {
    let rows: Vec<(Vec<T>, T)> = points
        .par_iter()
        .map(|x| {
            let mut terms = Vec::with_capacity(m.k());
            for (w, c) in m.weights.iter().zip(&m.components) {
                terms.push(w.ln() + c.log_density(x)?);
            }
            let lse = log_sum_exp(&terms);
            Ok((terms.iter().map(|&t| (t - lse).exp()).collect(), lse))
        })
        .collect::<Result<_>>()?;
    let mut ll = CompensatedSum::new();
    let mut resp = Vec::with_capacity(rows.len());
    for (r, l) in rows {
        ll.add(l);
        resp.push(r);
    }
    Ok((resp, ll.value()))
}

/// k-means++ seeding followed by a nearest-centre assignment.
fn kmeans_pp_labels<R: Rng + ?Sized>(stats: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let n = stats.len();
    let mut centres: Vec<usize> = vec![((open_unit(rng) * n as f64) as usize).min(n - 1)];
    let mut d2: Vec<f64> = stats.iter().map(|s| dist2(s, &stats[centres[0]])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = open_unit(rng) * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&v| {
                    acc += v;
                    u < acc
                })
                .unwrap_or(n - 1)
        } else {
            ((open_unit(rng) * n as f64) as usize).min(n - 1)
        };
        centres.push(next);
        for (d, s) in d2.iter_mut().zip(stats) {
            *d = d.min(dist2(s, &stats[next]));
        }
    }
    stats
        .iter()
        .map(|s| {
            centres
                .iter()
                .enumerate()
                .map(|(j, &c)| (j, dist2(s, &stats[c])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j)
                .expect("k >= 1")
        })
        .collect()
}
