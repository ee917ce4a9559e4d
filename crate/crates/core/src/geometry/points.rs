use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// A point `z = x + iy` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperHalfPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> UpperHalfPoint<T> {
    pub fn new(x: T, y: T) -> Result<Self> {
        if y > T::zero() {
            Ok(Self { x, y })
        } else {
            Err(Error::Domain(format!("upper half-plane point needs y > 0, got {:?}", y)))
        }
    }

    /// Vector sufficient statistic `−((x²+y²)/y, x/y, 1/y)`.
    pub fn sufficient_stat(&self) -> [T; 3] {
        let (x, y) = (self.x, self.y);
        [-(x * x + y * y) / y, -x / y, -T::one() / y]
    }
}

impl<T: Real> UpperHalfPoint<T> {
    /// Hyperbolic distance `arccosh(1 + |z−w|²/(2 y_z y_w))`.
    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let arg = T::one() + (dx * dx + dy * dy) / (T::two() * self.y * other.y);
        arg.acosh()
    }
}

/// A point of the hyperboloid sheet in chart coordinates `(x₁, …, x_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperboloidPoint<T> {
    pub x: Vec<T>,
}

impl<T: Real> HyperboloidPoint<T> {
    pub fn new(x: Vec<T>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::UnsupportedDimension(x.len()));
        }
        Ok(Self { x })
    }

    pub fn planar(x1: T, x2: T) -> Self {
        Self { x: vec![x1, x2] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `x̃₀ = √(1 + Σ xᵢ²)`.
    pub fn height(&self) -> T {
        (T::one() + self.x.iter().map(|&v| v * v).sum::<T>()).sqrt()
    }

    /// The lift `x̃ = (√(1+Σxᵢ²), x₁, …, x_d)` with `[x̃, x̃] = 1`.
    pub fn lift(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.x.len() + 1);
        out.push(self.height());
        out.extend_from_slice(&self.x);
        out
    }

    /// Chart coordinates of a vector on the sheet (drops the time component).
    pub fn from_lift(v: &[T]) -> Self {
        Self { x: v[1..].to_vec() }
    }

    /// Sufficient statistic `(−x̃₀, x₁, …, x_d)`.
    pub fn sufficient_stat(&self) -> Vec<T> {
        let mut t = self.lift();
        t[0] = -t[0];
        t
    }
}

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> DiskPoint<T> {
    pub fn new(u: T, v: T) -> Result<Self> {
        if u * u + v * v < T::one() {
            Ok(Self { u, v })
        } else {
            Err(Error::Domain(format!("disk point needs u^2 + v^2 < 1, got ({:?}, {:?})", u, v)))
        }
    }
}
