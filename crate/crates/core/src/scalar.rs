//! Scalar abstractions.
//!
//! Parameter algebra (cone membership, group actions, invariant triples) only
//! needs field operations and an order, so it is written against [`Scalar`]
//! and works for `f32`, `f64` and exact rationals alike. Everything that takes
//! square roots, logarithms or special functions requires [`Real`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// An ordered field element.
pub trait Scalar: Num + Copy + Neg<Output = Self> + PartialOrd + Debug + Send + Sync + 'static {
    /// Smallest value a determinant-like quantity of magnitude `scale²` must exceed
    /// to count as strictly positive. Zero for exact arithmetic.
    fn cone_slack(scale: Self) -> Self;

    /// Tolerance for identities such as `det g = 1` at unit scale. Zero for exact arithmetic.
    fn unit_slack() -> Self;

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn magnitude(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn cone_slack(scale: Self) -> Self {
        1e-12 * scale * scale
    }
    fn unit_slack() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn cone_slack(scale: Self) -> Self {
        1e-6 * scale * scale
    }
    fn unit_slack() -> Self {
        1e-5
    }
}

impl<I> Scalar for Ratio<I>
where
    I: num_traits::PrimInt + num_integer::Integer + Signed + Copy + Debug + Send + Sync + 'static,
{
    fn cone_slack(_scale: Self) -> Self {
        Self::from_integer(I::zero())
    }
    fn unit_slack() -> Self {
        Self::from_integer(I::zero())
    }
}

/// A floating-point scalar usable by every analytic routine in the crate.
pub trait Real: Scalar + Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Display + LowerExp {
    /// Converts an `f64` literal. Panics only if the type cannot represent finite literals.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}
