//! Semicircle bulk primitives.
//!
//! With `σ = 1/√(γη)` the bulk density is `ρ(λ) = √(4σ²−λ²)/(2πσ²)` on `[−2σ, 2σ]`.
//! Above the edge the resolvent `G`, its primitive `F` (with `F' = G`) and
//! `B = zG − 1` have closed forms on the principal branch.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemicircleBulk {
    sigma: f64,
}

/// Relative slack when testing `z ≥ 2σ` and `a ≤ 1/σ`.
const EDGE_TOL: f64 = 1e-12;

impl SemicircleBulk {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Bulk of a model with weight decay `gamma` and inverse learning temperature `eta`.
    pub fn from_hyper(gamma: f64, eta: f64) -> Result<Self> {
        Self::new(1.0 / (gamma * eta).sqrt())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn edge(&self) -> f64 {
        2.0 * self.sigma
    }

    pub fn density(&self, lambda: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let r = 4.0 * s2 - lambda * lambda;
        if r <= 0.0 {
            0.0
        } else {
            r.sqrt() / (2.0 * std::f64::consts::PI * s2)
        }
    }

    fn check_z(&self, z: f64) -> Result<f64> {
        let edge = self.edge();
        if z.is_nan() || z < edge * (1.0 - EDGE_TOL) {
            return Err(Error::Domain(format!("z={z} below bulk edge {edge}")));
        }
        Ok(z.max(edge))
    }

    /// Resolvent `G(z) = (z/σ − √(z²/σ² − 4))/(2σ)` for `z ≥ 2σ`.
    pub fn g(&self, z: f64) -> Result<f64> {
        let z = self.check_z(z)?;
        Ok(self.g_unchecked(z))
    }

    pub(crate) fn g_unchecked(&self, z: f64) -> f64 {
        let s = self.sigma;
        let x = z / s;
        let disc = (x * x - 4.0).max(0.0).sqrt();
        // Rationalised form avoids cancellation for large z.
        2.0 / (s * (x + disc))
    }

    /// `F(z) = σ²G²/2 − ln G`.
    pub fn f(&self, z: f64) -> Result<f64> {
        let g = self.g(z)?;
        Ok(self.f_of_g(g))
    }

    /// `F` expressed through `a = G(z)`.
    pub fn f_of_g(&self, a: f64) -> f64 {
        0.5 * self.sigma * self.sigma * a * a - a.ln()
    }

    /// `B(z) = zG(z) − 1`.
    pub fn b(&self, z: f64) -> Result<f64> {
        let g = self.g(z)?;
        Ok(z.max(self.edge()) * g - 1.0)
    }

    /// Unique `z ≥ 2σ` with `G(z) = a`, i.e. `1/a + σ²a`, for `0 < a ≤ 1/σ`.
    pub fn inverse_g(&self, a: f64) -> Result<f64> {
        let amax = 1.0 / self.sigma;
        if !(a > 0.0) || a > amax * (1.0 + EDGE_TOL) {
            return Err(Error::Domain(format!(
                "a={a} outside (0, 1/sigma={amax}]"
            )));
        }
        let a = a.min(amax);
        Ok(1.0 / a + self.sigma * self.sigma * a)
    }
}
