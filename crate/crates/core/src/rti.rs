//! Radio tomographic imaging from multi-channel RSS.
//!
//! Link measurements come in two flavours. The attenuation-based one compares
//! each reading against an empty-room calibration mean; the variance-based one
//! needs no calibration and uses the short-term spread of each channel around
//! its long-term mean. Both average the `m` most anti-fade channels of a link.
//! Images are reconstructed with a fixed regularized least-squares projection
//! under an exponentially decaying spatial prior.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LinkSet, VoxelGrid};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssSample {
    /// Seconds.
    pub t: f64,
    pub link: usize,
    pub channel: u8,
    /// dBm.
    pub rss: f64,
}

/// Image estimation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RtiParams {
    /// Voxel width `p` in meters.
    pub voxel_width: f64,
    /// Ellipse excess path length `lambda` in meters.
    pub ellipse_excess: f64,
    /// Voxel variance `sigma_x^2`.
    pub sigma_x2: f64,
    /// Noise standard deviation `sigma_N`, the regularization weight.
    pub sigma_n: f64,
    /// Voxel correlation distance `delta_c` in meters.
    pub delta_c: f64,
    /// Number of selected channels per link.
    pub m: usize,
    /// Short-term variance window.
    pub n_s: usize,
    /// Long-term mean window.
    pub n_mu: usize,
}

impl Default for RtiParams {
    fn default() -> Self {
        Self {
            voxel_width: 0.15,
            ellipse_excess: 0.02,
            sigma_x2: 0.05,
            sigma_n: 1.0,
            delta_c: 4.0,
            m: 3,
            n_s: 5,
            n_mu: 50,
        }
    }
}

impl RtiParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("voxel_width", self.voxel_width),
            ("ellipse_excess", self.ellipse_excess),
            ("sigma_x2", self.sigma_x2),
            ("sigma_n", self.sigma_n),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Params(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m == 0 {
            return Err(Error::Params("m must be at least 1".into()));
        }
        if self.n_s < 2 {
            return Err(Error::Params("n_s must be at least 2 for an unbiased variance".into()));
        }
        if self.n_mu <= self.n_s {
            return Err(Error::Params(format!("n_mu ({}) must exceed n_s ({})", self.n_mu, self.n_s)));
        }
        Ok(())
    }
}

/// Ellipse weight model: voxel `n` is inside link `l`'s ellipse when its
/// center's tx/rx distance sum is below `d_l + lambda`; inside weights are
/// `1 / sqrt(d_l)`.
pub fn compute_weight_matrix(links: &LinkSet, grid: &VoxelGrid, lambda: f64) -> Result<DMatrix<f64>> {
    let centers = grid.centers();
    let mut w = DMatrix::zeros(links.len(), grid.len());
    for (l, link) in links.links.iter().enumerate() {
        if !(link.length > 0.0) {
            return Err(Error::Geometry(format!("link {l} has zero length")));
        }
        let weight = 1.0 / link.length.sqrt();
        for (n, c) in centers.iter().enumerate() {
            if c.dist(&link.tx_pos) + c.dist(&link.rx_pos) < link.length + lambda {
                w[(l, n)] = weight;
            }
        }
    }
    Ok(w)
}

/// Empty-room mean RSS per (link, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub channels: Vec<u8>,
    /// `mean[link][channel_index]`
    pub mean: Vec<Vec<f64>>,
    pub count: Vec<Vec<usize>>,
}

pub fn channel_index(channels: &[u8], channel: u8) -> Option<usize> {
    channels.iter().position(|&c| c == channel)
}

/// Arithmetic mean of every (link, channel) stream. Every pair must be covered.
pub fn calibrate(samples: &[RssSample], n_links: usize, channels: &[u8]) -> Result<CalibrationTable> {
    let h = channels.len();
    let mut sum = vec![vec![0.0; h]; n_links];
    let mut count = vec![vec![0usize; h]; n_links];
    for s in samples {
        let Some(c) = channel_index(channels, s.channel) else {
            return Err(Error::Data(format!("sample on unconfigured channel {}", s.channel)));
        };
        if s.link >= n_links {
            return Err(Error::Data(format!("sample on unknown link {}", s.link)));
        }
        sum[s.link][c] += s.rss;
        count[s.link][c] += 1;
    }
    let gaps: Vec<(usize, u8)> = (0..n_links)
        .flat_map(|l| (0..h).map(move |c| (l, c)))
        .filter(|&(l, c)| count[l][c] == 0)
        .map(|(l, c)| (l, channels[c]))
        .collect();
    if !gaps.is_empty() {
        return Err(Error::CalibrationGaps(gaps));
    }
    let mean = sum.iter().zip(&count).map(|(s, n)| s.iter().zip(n).map(|(s, &n)| s / n as f64).collect()).collect();
    Ok(CalibrationTable { channels: channels.to_vec(), mean, count })
}

impl CalibrationTable {
    pub fn fade_levels(&self, link: usize) -> Vec<f64> {
        fade_levels(&self.mean[link])
    }

    pub fn ranking(&self, m: usize) -> FadeRanking {
        FadeRanking::new(self.mean.iter().map(|means| rank_channels(&fade_levels(means))).collect(), m)
    }
}

/// Fade level of each channel relative to the link's deepest-faded channel.
pub fn fade_levels(means: &[f64]) -> Vec<f64> {
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    means.iter().map(|r| r - min).collect()
}

/// Channel indices ordered from most anti-fade (highest fade level) to most
/// deep-fade. Ties keep ascending channel order.
pub fn rank_channels(levels: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[b].total_cmp(&levels[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadeRanking {
    /// Per link, channel indices most anti-fade first.
    pub order: Vec<Vec<usize>>,
    pub m: usize,
}

impl FadeRanking {
    pub fn new(order: Vec<Vec<usize>>, m: usize) -> Self {
        Self { order, m }
    }

    /// The selected set `A_i` of link `link`: its top `m` channels.
    pub fn selected(&self, link: usize) -> &[usize] {
        let o = &self.order[link];
        &o[..self.m.min(o.len())]
    }
}

/// Mean RSS change over the selected channels, `current - calibration`.
/// Shadowing makes this negative.
pub fn ab_link_measurement(means: &[f64], selected: &[usize], current: &[f64]) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::Params("empty channel selection".into()));
    }
    let total: f64 = selected.iter().map(|&c| current[c] - means[c]).sum();
    Ok(total / selected.len() as f64)
}

/// Sliding RSS history of one link, one ring per channel.
#[derive(Debug, Clone)]
pub struct VbLinkState {
    windows: Vec<VecDeque<f64>>,
    n_mu: usize,
}

impl VbLinkState {
    pub fn new(n_channels: usize, n_mu: usize) -> Self {
        Self { windows: vec![VecDeque::with_capacity(n_mu); n_channels], n_mu }
    }

    pub fn push(&mut self, channel: usize, rss: f64) {
        let w = &mut self.windows[channel];
        if w.len() == self.n_mu {
            w.pop_front();
        }
        w.push_back(rss);
    }

    /// Long-term mean of each channel over the last `n_mu` readings (fewer
    /// while the window fills).
    pub fn long_term_means(&self) -> Vec<f64> {
        self.windows
            .iter()
            .map(|w| if w.is_empty() { f64::NAN } else { w.iter().sum::<f64>() / w.len() as f64 })
            .collect()
    }

    /// Unbiased spread of the last `n_s` readings around the long-term mean.
    pub fn short_term_variance(&self, channel: usize, n_s: usize, mean: f64) -> Option<f64> {
        let w = &self.windows[channel];
        if w.len() < n_s || n_s < 2 {
            return None;
        }
        let ss: f64 = w.iter().rev().take(n_s).map(|r| (r - mean).powi(2)).sum();
        Some(ss / (n_s - 1) as f64)
    }

    /// Variance-based link measurement over the `m` channels with the highest
    /// long-term mean. `None` until every channel holds `n_s` readings.
    pub fn measurement(&self, m: usize, n_s: usize) -> Option<f64> {
        if m == 0 || self.windows.iter().any(|w| w.len() < n_s) {
            return None;
        }
        let means = self.long_term_means();
        let order = rank_channels(&fade_levels(&means));
        let selected = &order[..m.min(order.len())];
        let total: f64 = selected.iter().map(|&c| self.short_term_variance(c, n_s, means[c])).sum::<Option<f64>>()?;
        Some(total / selected.len() as f64)
    }
}

/// Inverse of the exponential-decay prior covariance
/// `[C]_ji = sigma_x^2 exp(-|v_j - v_i| / delta_c)`, scaled by `sigma_N^2`.
/// Depends only on the grid, so it can be shared between link subsets.
#[derive(Debug, Clone)]
pub struct PriorPrecision {
    pub scaled_inverse: DMatrix<f64>,
}

impl PriorPrecision {
    pub fn new(grid: &VoxelGrid, params: &RtiParams) -> Result<Self> {
        let c = prior_covariance(grid, params.sigma_x2, params.delta_c);
        let chol = c.cholesky().ok_or(Error::Singular("prior covariance"))?;
        let scaled_inverse = chol.inverse() * params.sigma_n.powi(2);
        Ok(Self { scaled_inverse })
    }
}

pub fn prior_covariance(grid: &VoxelGrid, sigma_x2: f64, delta_c: f64) -> DMatrix<f64> {
    let centers = grid.centers();
    DMatrix::from_fn(centers.len(), centers.len(), |j, i| sigma_x2 * (-centers[j].dist(&centers[i]) / delta_c).exp())
}

/// `Pi = (W^T W + C^-1 sigma_N^2)^-1 W^T`.
pub fn build_projection(w: &DMatrix<f64>, grid: &VoxelGrid, params: &RtiParams) -> Result<DMatrix<f64>> {
    let prior = PriorPrecision::new(grid, params)?;
    projection_with_prior(w, &prior)
}

pub fn projection_with_prior(w: &DMatrix<f64>, prior: &PriorPrecision) -> Result<DMatrix<f64>> {
    let n = prior.scaled_inverse.nrows();
    if w.ncols() != n {
        return Err(Error::Dimension { what: "weight matrix columns", expected: n, got: w.ncols() });
    }
    let wt = w.transpose();
    let a = &wt * w + &prior.scaled_inverse;
    let chol = a.cholesky().ok_or(Error::Singular("regularized normal matrix"))?;
    Ok(chol.solve(&wt))
}

/// `x = Pi y`.
pub fn estimate_image(projection: &DMatrix<f64>, y: &[f64]) -> Result<Image> {
    if y.len() != projection.ncols() {
        return Err(Error::Dimension { what: "link measurements", expected: projection.ncols(), got: y.len() });
    }
    let x = projection * DVector::from_column_slice(y);
    Ok(Image::new(x.as_slice().to_vec()))
}
