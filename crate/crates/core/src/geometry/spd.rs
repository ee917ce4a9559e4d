use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Natural parameter of a Poincaré distribution: the symmetric positive-definite
/// matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdParam2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> SpdParam2<T> {
    /// Validates cone membership: `a > 0`, `c > 0`, `ac − b² > slack(max(|a|,|b|,|c|))`.
    pub fn new(a: T, b: T, c: T) -> Result<Self> {
        let p = Self { a, b, c };
        p.validate()?;
        Ok(p)
    }

    /// Builds from a full 2×2 matrix, rejecting asymmetric input.
    pub fn from_matrix(m: [[T; 2]; 2]) -> Result<Self> {
        let scale = m[0][1].magnitude().max_of(m[1][0].magnitude()).max_of(T::one());
        if (m[0][1] - m[1][0]).magnitude() > T::unit_slack() * scale {
            return Err(Error::ConeViolation(format!(
                "matrix is not symmetric: off-diagonal entries {:?} and {:?}",
                m[0][1], m[1][0]
            )));
        }
        Self::new(m[0][0], m[0][1], m[1][1])
    }

    pub fn identity() -> Self {
        Self {
            a: T::one(),
            b: T::zero(),
            c: T::one(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > T::zero()) {
            return Err(Error::ConeViolation(format!("a > 0 violated (a = {:?})", self.a)));
        }
        if !(self.c > T::zero()) {
            return Err(Error::ConeViolation(format!("c > 0 violated (c = {:?})", self.c)));
        }
        let scale = self.a.magnitude().max_of(self.b.magnitude()).max_of(self.c.magnitude());
        let det = self.det();
        if !(det > T::cone_slack(scale)) {
            return Err(Error::ConeViolation(format!("ac - b^2 > 0 violated (ac - b^2 = {:?})", det)));
        }
        Ok(())
    }

    /// `|θ| = ac − b²`.
    pub fn det(&self) -> T {
        self.a * self.c - self.b * self.b
    }

    pub fn trace(&self) -> T {
        self.a + self.c
    }

    pub fn to_matrix(&self) -> [[T; 2]; 2] {
        [[self.a, self.b], [self.b, self.c]]
    }

    /// Entries `(a, b, c)` of `θ⁻¹`.
    pub fn inverse_entries(&self) -> (T, T, T) {
        let det = self.det();
        (self.c / det, -self.b / det, self.a / det)
    }

    /// `tr(other · self⁻¹)`.
    pub fn trace_ratio(&self, other: &Self) -> T {
        (other.a * self.c - T::two() * other.b * self.b + other.c * self.a) / self.det()
    }

    /// Frobenius pairing `tr(θ Mᵀ)` with an arbitrary symmetric matrix `[[p, q], [q, r]]`.
    pub fn pair(&self, p: T, q: T, r: T) -> T {
        self.a * p + T::two() * self.b * q + self.c * r
    }

    /// `s·self + t·other`, which may leave the cone; callers validate.
    pub fn combine(&self, s: T, other: &Self, t: T) -> (T, T, T) {
        (s * self.a + t * other.a, s * self.b + t * other.b, s * self.c + t * other.c)
    }

    /// Determinant of `s·self + t·other` without constructing it.
    pub fn combined_det(&self, s: T, other: &Self, t: T) -> T {
        let (a, b, c) = self.combine(s, other, t);
        a * c - b * b
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        Self::new(s * self.a, s * self.b, s * self.c)
    }
}

impl<T: Real> SpdParam2<T> {
    /// `D = √|θ|`.
    pub fn sqrt_det(&self) -> T {
        self.det().sqrt()
    }

    pub fn to_vec(&self) -> [T; 3] {
        [self.a, self.b, self.c]
    }
}

/// Symmetric negative-definite moment matrix `[[p, q], [q, r]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment2<T> {
    pub p: T,
    pub q: T,
    pub r: T,
}

impl<T: Scalar> Moment2<T> {
    /// Accepts any symmetric matrix; negative definiteness is checked by
    /// [`Moment2::is_negative_definite`] where it matters.
    pub fn new(p: T, q: T, r: T) -> Self {
        Self { p, q, r }
    }

    pub fn det(&self) -> T {
        self.p * self.r - self.q * self.q
    }

    pub fn is_negative_definite(&self) -> bool {
        self.p < T::zero() && self.r < T::zero() && self.det() > T::zero()
    }

    pub fn to_matrix(&self) -> [[T; 2]; 2] {
        [[self.p, self.q], [self.q, self.r]]
    }
}
