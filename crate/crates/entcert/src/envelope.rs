//! Momentum-space orbital envelope of a single lattice site.
//!
//! After time-of-flight expansion each atom's momentum distribution is the
//! lattice-site orbital profile `|w̃(k)|²` modulated by interference fringes.
//! Only a Gaussian profile is supported: `|w̃(k)|²` is a normal density with
//! standard deviation `σ_k` (momenta in units of `1/d`, stored as `k·d`).
//!
//! Every fringe integral factorizes into the 1D moments
//! `f(γ) = ∫ |w̃(k)|² cos(γ d k) dk = exp(−(γ d σ_k)²/2)`,
//! which this module provides in closed form.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gaussian single-site momentum envelope with std `σ_k` (units of `1/d`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnvelope {
    /// Momentum-space standard deviation `σ_k · d`.
    pub sigma_k: f64,
}

/// Default envelope width `σ_k · d = 1`.
pub const DEFAULT_SIGMA_K: f64 = 1.0;

impl Default for GaussianEnvelope {
    fn default() -> Self {
        GaussianEnvelope { sigma_k: DEFAULT_SIGMA_K }
    }
}

impl GaussianEnvelope {
    /// Validated constructor.
    pub fn new(sigma_k: f64) -> Result<Self> {
        if !(sigma_k.is_finite() && sigma_k > 0.0) {
            return Err(Error::config(format!("envelope σ_k must be positive, got {sigma_k}")));
        }
        Ok(GaussianEnvelope { sigma_k })
    }

    /// Fringe moment `f(γ) = ∫ |w̃(k)|² cos(γ d k) dk`, normalized so
    /// `f(0) = 1`. Even in `γ`.
    pub fn fringe_moment(&self, gamma: i64) -> f64 {
        let x = gamma as f64 * self.sigma_k;
        (-0.5 * x * x).exp()
    }

    /// Envelope density `|w̃(k)|²` at `kd` (normal density, std `σ_k`).
    pub fn density(&self, kd: f64) -> f64 {
        let s = self.sigma_k;
        (-0.5 * (kd / s) * (kd / s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Default ancestral-sampling cutoff: smallest `δ_c` such that any
    /// neglected term (those with `Σ δ_i² > δ_c`) has relative envelope
    /// weight `∏ f(δ_i) = exp(−δ_c σ_k²/2) < 1e-8`.
    pub fn default_delta_c(&self) -> f64 {
        2.0 * 8.0 * std::f64::consts::LN_10 / (self.sigma_k * self.sigma_k)
    }
}
