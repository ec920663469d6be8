use std::collections::VecDeque;

use super::CirFrame;
use crate::error::{Error, Result};

/// Variance-based change intensity: short-term unbiased variance of each bin
/// over the last `n_u` frames, divided by an IIR estimate of the bin's mean
/// energy, `g <- g (1 - beta) + r beta`. Needs no calibration.
#[derive(Debug, Clone)]
pub struct VbNormalizer {
    window: VecDeque<Vec<f64>>,
    g: Vec<f64>,
    n_u: usize,
    beta: f64,
    floor: f64,
}

impl VbNormalizer {
    pub fn new(n_u: usize, beta: f64, floor: f64) -> Self {
        Self { window: VecDeque::with_capacity(n_u), g: Vec::new(), n_u, beta, floor }
    }

    /// Feeds one frame. Returns the intensity vector once `n_u` frames are buffered.
    /// The normalizer starts from the first frame's energies.
    pub fn push(&mut self, frame: &CirFrame) -> Result<Option<Vec<f64>>> {
        if self.g.is_empty() {
            self.g = frame.energies.clone();
        } else {
            if frame.energies.len() != self.g.len() {
                return Err(Error::Dimension { what: "CIR bins", expected: self.g.len(), got: frame.energies.len() });
            }
            for (g, r) in self.g.iter_mut().zip(&frame.energies) {
                *g = *g * (1.0 - self.beta) + r * self.beta;
            }
        }
        if self.window.len() == self.n_u {
            self.window.pop_front();
        }
        self.window.push_back(frame.energies.clone());
        if self.window.len() < self.n_u {
            return Ok(None);
        }
        Ok(Some(self.alpha()))
    }

    fn alpha(&self) -> Vec<f64> {
        let n = self.window.len() as f64;
        (0..self.g.len())
            .map(|k| {
                let mean = self.window.iter().map(|f| f[k]).sum::<f64>() / n;
                let var = self.window.iter().map(|f| (f[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                var / self.g[k].max(self.floor)
            })
            .collect()
    }

    pub fn normalizer(&self) -> &[f64] {
        &self.g
    }
}
