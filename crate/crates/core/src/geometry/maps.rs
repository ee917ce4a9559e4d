use serde::{Deserialize, Serialize};

use super::lorentz::LorentzParam;
use super::points::{DiskPoint, HyperboloidPoint, UpperHalfPoint};
use super::spd::SpdParam2;
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Maximal-invariant triple of a parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantTriple<T> {
    pub s1: T,
    pub s2: T,
    pub s3: T,
}

impl<T: Copy> InvariantTriple<T> {
    pub fn to_array(&self) -> [T; 3] {
        [self.s1, self.s2, self.s3]
    }
}

/// `(|θ|, |θ′|, tr(θ′θ⁻¹))`.
pub fn poincare_invariant<T: Scalar>(theta: &SpdParam2<T>, theta2: &SpdParam2<T>) -> InvariantTriple<T> {
    InvariantTriple {
        s1: theta.det(),
        s2: theta2.det(),
        s3: theta.trace_ratio(theta2),
    }
}

/// `([θ,θ], [θ′,θ′], [θ,θ′])`.
pub fn lorentz_invariant<T: Scalar>(
    theta: &LorentzParam<T>,
    theta2: &LorentzParam<T>,
) -> Result<InvariantTriple<T>> {
    theta.check_same_dim(theta2)?;
    Ok(InvariantTriple {
        s1: theta.norm_sq(),
        s2: theta2.norm_sq(),
        s3: theta.inner(theta2)?,
    })
}

/// `θ_𝕃 = (a + c, a − c, 2b)`.
pub fn param_h_to_l<T: Scalar>(theta: &SpdParam2<T>) -> LorentzParam<T> {
    LorentzParam {
        d: 2,
        theta: vec![theta.a + theta.c, theta.a - theta.c, T::two() * theta.b],
    }
}

/// Inverse of [`param_h_to_l`]; requires `d = 2`.
pub fn param_l_to_h<T: Scalar>(theta: &LorentzParam<T>) -> Result<SpdParam2<T>> {
    if theta.d != 2 {
        return Err(Error::UnsupportedDimension(theta.d));
    }
    let (t0, t1, t2) = (theta.theta[0], theta.theta[1], theta.theta[2]);
    let two = T::two();
    SpdParam2::new((t0 + t1) / two, t2 / two, (t0 - t1) / two)
}

/// `(X, Y) = ((1 − x² − y²)/(2y), x/y)`.
pub fn point_h_to_l<T: Real>(z: &UpperHalfPoint<T>) -> HyperboloidPoint<T> {
    let (x, y) = (z.x, z.y);
    HyperboloidPoint::planar((T::one() - x * x - y * y) / (T::two() * y), x / y)
}

/// Inverse of [`point_h_to_l`]: the positive root of `y²(1+Y²) + 2Xy − 1 = 0`.
pub fn point_l_to_h<T: Real>(p: &HyperboloidPoint<T>) -> Result<UpperHalfPoint<T>> {
    if p.dim() != 2 {
        return Err(Error::UnsupportedDimension(p.dim()));
    }
    let (big_x, big_y) = (p.x[0], p.x[1]);
    let h = (T::one() + big_x * big_x + big_y * big_y).sqrt();
    let q = T::one() + big_y * big_y;
    // Rationalized form avoids cancellation when X ≫ 0.
    let y = if big_x > T::zero() {
        T::one() / (h + big_x)
    } else {
        (h - big_x) / q
    };
    Ok(UpperHalfPoint { x: y * big_y, y })
}

/// Cayley map `w = (z − i)/(z + i)`.
pub fn point_h_to_disk<T: Real>(z: &UpperHalfPoint<T>) -> DiskPoint<T> {
    let (x, y) = (z.x, z.y);
    let den = x * x + (y + T::one()) * (y + T::one());
    DiskPoint {
        u: (x * x + y * y - T::one()) / den,
        v: -T::two() * x / den,
    }
}

/// Inverse Cayley map `z = i(1 + w)/(1 − w)`.
pub fn point_disk_to_h<T: Real>(w: &DiskPoint<T>) -> UpperHalfPoint<T> {
    let (u, v) = (w.u, w.v);
    let den = (T::one() - u) * (T::one() - u) + v * v;
    UpperHalfPoint {
        x: -T::two() * v / den,
        y: (T::one() - u * u - v * v) / den,
    }
}

/// `log |dz/dw|² = log 4 − 4 log|1 − w|`, the area Jacobian of [`point_disk_to_h`].
///
/// A density `p` on ℍ transfers to the disk as `p(z(w)) · |dz/dw|²`.
pub fn disk_to_h_log_jacobian<T: Real>(w: &DiskPoint<T>) -> T {
    let m = (T::one() - w.u) * (T::one() - w.u) + w.v * w.v;
    T::of(4.0).ln() - T::two() * m.ln()
}
