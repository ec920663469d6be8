//! UWB bistatic ranging from channel impulse response (CIR) energy profiles.
//!
//! Delay bins are 0-based: `energies[k]` holds the energy of bin `k`, and the
//! "previous bin" of bin 0 is taken to carry zero change probability.

mod hmm;
mod image;
mod kld;
mod vb;

pub use hmm::{
    baum_welch, baum_welch_update, estimate_k_star, forward_backward, HmmParams, LogNormal, Posterior, OBS_EPSILON,
    SCALE_FLOOR,
};
pub use image::{uwb_image, DelayMap};
pub use kld::{kld_observation, observation_vector, CirCalibration, Gaussian};
pub use vb::VbNormalizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One captured CIR: per-bin energies sampled every `T` ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirFrame {
    /// Seconds.
    pub t: f64,
    pub energies: Vec<f64>,
}

impl CirFrame {
    pub fn validate(&self, bins: usize) -> Result<()> {
        if self.energies.len() != bins {
            return Err(Error::Dimension { what: "CIR bins", expected: bins, got: self.energies.len() });
        }
        if let Some(k) = self.energies.iter().position(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Data(format!("CIR at t={} has invalid energy in bin {k}", self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UwbParams {
    /// Sampling period `T` in nanoseconds.
    pub sampling_period_ns: f64,
    /// Short-term CIR variance window `N_U`, also the length of the
    /// runtime window compared against calibration.
    pub n_u: usize,
    /// IIR normalizer weight; `1 / n_u` when unset.
    pub beta: Option<f64>,
    /// Line-of-sight bin; detected from the first frames when unset.
    pub los_bin: Option<usize>,
    /// Variance floor relative to the mean calibration energy.
    pub variance_floor: f64,
    /// Lower bound of the VB normalizer.
    pub normalizer_floor: f64,
}

impl Default for UwbParams {
    fn default() -> Self {
        Self {
            sampling_period_ns: 1.0,
            n_u: 5,
            beta: None,
            los_bin: None,
            variance_floor: 1e-9,
            normalizer_floor: 1e-12,
        }
    }
}

impl UwbParams {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0 / self.n_u as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_period_ns > 0.0) {
            return Err(Error::Params("sampling period must be positive".into()));
        }
        if self.n_u < 2 {
            return Err(Error::Params("n_u must be at least 2".into()));
        }
        let b = self.beta();
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::Params(format!("beta must lie in (0, 1], got {b}")));
        }
        if !(self.variance_floor > 0.0) || !(self.normalizer_floor > 0.0) {
            return Err(Error::Params("floors must be positive".into()));
        }
        Ok(())
    }
}

/// First bin whose mean energy reaches half of the strongest mean bin.
pub fn detect_los_bin(frames: &[CirFrame]) -> Option<usize> {
    let first = frames.first()?;
    let mut mean = vec![0.0; first.energies.len()];
    for f in frames {
        for (m, e) in mean.iter_mut().zip(&f.energies) {
            *m += e;
        }
    }
    let peak = mean.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    mean.iter().position(|&m| m >= 0.5 * peak)
}
