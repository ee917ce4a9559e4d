//! Hyperbolic models, parameter cones, group actions and the correspondence
//! between the upper half-plane and the hyperboloid.

mod lorentz;
mod maps;
mod mobius;
mod points;
mod spd;

pub use lorentz::{minkowski_inner, LorentzParam, LorentzTransform};
pub(crate) use lorentz::minkowski_unchecked;
pub use maps::{
    disk_to_h_log_jacobian, lorentz_invariant, param_h_to_l, param_l_to_h, point_disk_to_h, point_h_to_disk,
    point_h_to_l, point_l_to_h, poincare_invariant, InvariantTriple,
};
pub use mobius::Mobius;
pub use points::{DiskPoint, HyperboloidPoint, UpperHalfPoint};
pub use spd::{Moment2, SpdParam2};

/// `g.z` for `g ∈ SL(2, ℝ)`.
pub fn mobius_act_point<T: crate::scalar::Scalar>(g: &Mobius<T>, z: &UpperHalfPoint<T>) -> UpperHalfPoint<T> {
    g.act_point(z)
}

/// `g.θ = g^{−⊤} θ g^{−1}`.
pub fn mobius_act_param<T: crate::scalar::Scalar>(g: &Mobius<T>, theta: &SpdParam2<T>) -> SpdParam2<T> {
    g.act_param(theta)
}

/// Random element of SO₀(1, d).
pub fn lorentz_random_element<T: crate::scalar::Real>(d: usize, seed: u64) -> LorentzTransform<T> {
    LorentzTransform::random(d, seed)
}
