use super::CirFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

/// Symmetric Kullback-Leibler divergence between two Gaussians.
pub fn kld_observation(p: Gaussian, q: Gaussian) -> f64 {
    let (vp, vq) = (p.var, q.var);
    let d = p.mean - q.mean;
    0.5 * (vp / vq + vq / vp + d * d * (vp + vq) / (vp * vq)) - 1.0
}

/// Per-bin energy statistics of a reference window.
#[derive(Debug, Clone, PartialEq)]
pub struct CirCalibration {
    pub bins: Vec<Gaussian>,
    /// Absolute variance floor applied to calibration and runtime windows.
    pub floor: f64,
}

impl CirCalibration {
    /// Mean and unbiased variance of every bin over `frames`, variances floored
    /// at `relative_floor` times the mean calibration energy.
    pub fn new(frames: &[CirFrame], relative_floor: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Data("no calibration CIR frames".into()));
        };
        let m = first.energies.len();
        for f in frames {
            f.validate(m)?;
        }
        let mean_energy = frames.iter().flat_map(|f| f.energies.iter()).sum::<f64>() / (frames.len() * m).max(1) as f64;
        let floor = (relative_floor * mean_energy).max(f64::MIN_POSITIVE);
        Ok(Self { bins: window_stats(frames, floor), floor })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

fn window_stats<'a, I>(frames: I, floor: f64) -> Vec<Gaussian>
where
    I: IntoIterator<Item = &'a CirFrame>,
    I::IntoIter: Clone,
{
    let it = frames.into_iter();
    let n = it.clone().count();
    let m = it.clone().next().map_or(0, |f| f.energies.len());
    let mut mean = vec![0.0; m];
    for f in it.clone() {
        for (a, e) in mean.iter_mut().zip(&f.energies) {
            *a += e;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut ss = vec![0.0; m];
    for f in it {
        for ((s, e), mu) in ss.iter_mut().zip(&f.energies).zip(&mean) {
            *s += (e - mu).powi(2);
        }
    }
    let denom = n.saturating_sub(1).max(1) as f64;
    mean.into_iter().zip(ss).map(|(mean, s)| Gaussian { mean, var: (s / denom).max(floor) }).collect()
}

/// Observation vector `O_k` comparing the runtime window against calibration.
pub fn observation_vector<'a, I>(calibration: &CirCalibration, window: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a CirFrame>,
    I::IntoIter: Clone,
{
    let it = window.into_iter();
    if it.clone().next().is_none() {
        return Err(Error::Data("empty CIR window".into()));
    }
    for f in it.clone() {
        f.validate(calibration.len())?;
    }
    let q = window_stats(it, calibration.floor);
    Ok(calibration.bins.iter().zip(q).map(|(p, q)| kld_observation(*p, q).max(0.0)).collect())
}
