//! Poincaré and hyperboloid exponential families of hyperbolic probability
//! distributions.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: modified Bessel `K_ν` and the scaled incomplete gamma `e^x Γ(0, x)`.
//! * [`geometry`]: points, parameter cones, SL(2, ℝ) and SO₀(1, d) actions,
//!   maximal invariants and the half-plane / hyperboloid / disk maps.
//! * [`poincare`] and [`hyperboloid`]: densities, cumulants, closed-form
//!   divergences, entropy, Fisher information and maximum likelihood.
//! * [`sampling`]: exact variate generation.
//! * [`montecarlo`]: f-divergence estimators with variance reporting.
//! * [`mixtures`]: finite mixtures and EM.
//!
//! Core routines are generic over [`scalar::Real`] (or [`scalar::Scalar`] for
//! pure parameter algebra, which also admits exact rationals). The aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod geometry;
pub mod hyperboloid;
pub mod mixtures;
mod optim;
pub mod montecarlo;
pub mod poincare;
pub mod sampling;
pub mod scalar;
pub mod specfun;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type SpdParam = geometry::SpdParam2<f64>;
pub type Moment = geometry::Moment2<f64>;
pub type LorentzParam = geometry::LorentzParam<f64>;
pub type UpperHalfPoint = geometry::UpperHalfPoint<f64>;
pub type HyperboloidPoint = geometry::HyperboloidPoint<f64>;
pub type DiskPoint = geometry::DiskPoint<f64>;
pub type Mobius = geometry::Mobius<f64>;
pub type LorentzTransform = geometry::LorentzTransform<f64>;
pub type InvariantTriple = geometry::InvariantTriple<f64>;
