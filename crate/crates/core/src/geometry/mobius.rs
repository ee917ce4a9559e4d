use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::points::UpperHalfPoint;
use super::spd::SpdParam2;
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// An element `g = [[g11, g12], [g21, g22]]` of SL(2, ℝ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius<T> {
    pub g11: T,
    pub g12: T,
    pub g21: T,
    pub g22: T,
}

impl<T: Scalar> Mobius<T> {
    pub fn new(g11: T, g12: T, g21: T, g22: T) -> Result<Self> {
        let g = Self { g11, g12, g21, g22 };
        let det = g.det();
        if (det - T::one()).magnitude() > T::unit_slack() {
            return Err(Error::InvalidArgument(format!("SL(2) element needs det = 1, got {:?}", det)));
        }
        Ok(g)
    }

    pub fn identity() -> Self {
        Self {
            g11: T::one(),
            g12: T::zero(),
            g21: T::zero(),
            g22: T::one(),
        }
    }

    pub fn det(&self) -> T {
        self.g11 * self.g22 - self.g12 * self.g21
    }

    /// Exact inverse (uses `det = 1`).
    pub fn inverse(&self) -> Self {
        Self {
            g11: self.g22,
            g12: -self.g12,
            g21: -self.g21,
            g22: self.g11,
        }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            g11: self.g11 * other.g11 + self.g12 * other.g21,
            g12: self.g11 * other.g12 + self.g12 * other.g22,
            g21: self.g21 * other.g11 + self.g22 * other.g21,
            g22: self.g21 * other.g12 + self.g22 * other.g22,
        }
    }

    /// Linear fractional action `z ↦ (g11 z + g12)/(g21 z + g22)`.
    pub fn act_point(&self, z: &UpperHalfPoint<T>) -> UpperHalfPoint<T> {
        let (x, y) = (z.x, z.y);
        let nr = self.g11 * x + self.g12;
        let dr = self.g21 * x + self.g22;
        let di = self.g21 * y;
        let den = dr * dr + di * di;
        UpperHalfPoint {
            x: (nr * dr + self.g11 * self.g21 * y * y) / den,
            // Im = y·det(g)/|g21 z + g22|².
            y: y * self.det() / den,
        }
    }

    /// Parameter action `g.θ = g^{−⊤} θ g^{−1}`, so that `p_θ ∘ g⁻¹ = p_{g.θ}`.
    pub fn act_param(&self, theta: &SpdParam2<T>) -> SpdParam2<T> {
        let h = self.inverse();
        // (h^T θ h)_{ij} = Σ h_{ki} θ_{kl} h_{lj}
        let th = theta.to_matrix();
        let hm = [[h.g11, h.g12], [h.g21, h.g22]];
        let entry = |i: usize, j: usize| {
            let mut s = T::zero();
            for k in 0..2 {
                for l in 0..2 {
                    s = s + hm[k][i] * th[k][l] * hm[l][j];
                }
            }
            s
        };
        SpdParam2 {
            a: entry(0, 0),
            b: entry(0, 1),
            c: entry(1, 1),
        }
    }
}

impl<T: Real> Mobius<T> {
    /// `rotation(angle) · diag(e^s, e^{−s}) · [[1, shear], [0, 1]]`.
    pub fn from_iwasawa(angle: T, log_scale: T, shear: T) -> Self {
        let (s, c) = angle.sin_cos();
        let k = Self {
            g11: c,
            g12: -s,
            g21: s,
            g22: c,
        };
        let a = Self {
            g11: log_scale.exp(),
            g12: T::zero(),
            g21: T::zero(),
            g22: (-log_scale).exp(),
        };
        let n = Self {
            g11: T::one(),
            g12: shear,
            g21: T::zero(),
            g22: T::one(),
        };
        k.compose(&a).compose(&n)
    }

    /// A random element with bounded scaling (`|s| ≤ 1`) and shear (`|u| ≤ 2`).
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self::random_with(&mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let angle = T::of(rng.gen_range(0.0..std::f64::consts::TAU));
        let log_scale = T::of(rng.gen_range(-1.0..1.0));
        let shear = T::of(rng.gen_range(-2.0..2.0));
        Self::from_iwasawa(angle, log_scale, shear)
    }
}
