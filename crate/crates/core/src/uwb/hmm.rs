//! Two-state hidden Markov chain running along the delay axis: state 0 is an
//! unchanged bin, state 1 a bin changed by the target. Observations are the
//! per-bin divergences, modelled as log-normal in each state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shift applied before taking `ln O`, so that `O = 0` stays finite.
pub const OBS_EPSILON: f64 = 1e-12;
/// Smallest log-normal scale Baum-Welch may produce.
pub const SCALE_FLOOR: f64 = 1e-3;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-normal law of `O`: `ln(O + eps)` is normal with this location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormal {
    pub location: f64,
    pub scale: f64,
}

impl LogNormal {
    pub fn ln_pdf(&self, o: f64) -> f64 {
        let x = o.max(0.0) + OBS_EPSILON;
        let lx = x.ln();
        let z = (lx - self.location) / self.scale;
        -lx - self.scale.ln() - HALF_LN_2PI - 0.5 * z * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmParams {
    pub initial: [f64; 2],
    pub transition: [[f64; 2]; 2],
    pub emission: [LogNormal; 2],
}

impl Default for HmmParams {
    /// Seed model for a 64-bin profile.
    fn default() -> Self {
        Self::delay_axis(64, [LogNormal { location: -0.5, scale: 1.5 }, LogNormal { location: 4.0, scale: 2.0 }])
    }
}

impl HmmParams {
    /// One expected change per sweep: `P_01 = 1 / bins`, changed state absorbing.
    pub fn delay_axis(bins: usize, emission: [LogNormal; 2]) -> Self {
        let rho = 1.0 / bins.max(1) as f64;
        Self { initial: [1.0 - rho, rho], transition: [[1.0 - rho, rho], [0.0, 1.0]], emission }
    }

    /// Same emissions and change rate re-derived for a different profile length.
    pub fn resized(&self, bins: usize) -> Self {
        Self::delay_axis(bins, self.emission)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        let sums_to_one = |r: &[f64; 2]| (r[0] + r[1] - 1.0).abs() < 1e-9 && prob(r[0]) && prob(r[1]);
        if !sums_to_one(&self.initial) {
            return Err(Error::Params(format!("initial probabilities {:?} do not sum to 1", self.initial)));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if !sums_to_one(row) {
                return Err(Error::Params(format!("transition row {i} {row:?} does not sum to 1")));
            }
        }
        for e in &self.emission {
            if !(e.scale > 0.0) || !e.location.is_finite() || !e.scale.is_finite() {
                return Err(Error::Params(format!("invalid log-normal {e:?}")));
            }
        }
        Ok(())
    }

    pub fn is_absorbing(&self) -> bool {
        self.transition[1][0] == 0.0
    }
}

/// Smoothed change probabilities `alpha_k = P(X_k = 1 | O, params)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub alpha: Vec<f64>,
    pub log_likelihood: f64,
}

struct Smoothed {
    gamma: Vec<[f64; 2]>,
    xi: [[f64; 2]; 2],
    log_likelihood: f64,
}

fn smooth(obs: &[f64], p: &HmmParams) -> Result<Smoothed> {
    let n = obs.len();
    if n == 0 {
        return Err(Error::Data("empty observation vector".into()));
    }
    if let Some(k) = obs.iter().position(|o| o.is_nan()) {
        return Err(Error::Data(format!("NaN observation at bin {k}")));
    }
    // Emission likelihoods rescaled per bin by their largest log value.
    let mut b = vec![[0.0; 2]; n];
    let mut log_likelihood = 0.0;
    for (k, &o) in obs.iter().enumerate() {
        let l = [p.emission[0].ln_pdf(o), p.emission[1].ln_pdf(o)];
        let top = l[0].max(l[1]);
        if !top.is_finite() {
            return Err(Error::DegenerateObservation(k));
        }
        b[k] = [(l[0] - top).exp(), (l[1] - top).exp()];
        log_likelihood += top;
    }

    let tr = &p.transition;
    let mut fwd = vec![[0.0; 2]; n];
    let mut scale = vec![0.0; n];
    for k in 0..n {
        let prior = if k == 0 {
            p.initial
        } else {
            let a = fwd[k - 1];
            [a[0] * tr[0][0] + a[1] * tr[1][0], a[0] * tr[0][1] + a[1] * tr[1][1]]
        };
        let v = [prior[0] * b[k][0], prior[1] * b[k][1]];
        let c = v[0] + v[1];
        if !(c > 0.0) {
            return Err(Error::DegenerateObservation(k));
        }
        fwd[k] = [v[0] / c, v[1] / c];
        scale[k] = c;
        log_likelihood += c.ln();
    }

    let mut bwd = vec![[1.0; 2]; n];
    for k in (0..n - 1).rev() {
        let next = [b[k + 1][0] * bwd[k + 1][0], b[k + 1][1] * bwd[k + 1][1]];
        for i in 0..2 {
            bwd[k][i] = (tr[i][0] * next[0] + tr[i][1] * next[1]) / scale[k + 1];
        }
    }

    let mut gamma = vec![[0.0; 2]; n];
    let mut xi = [[0.0; 2]; 2];
    for k in 0..n {
        let g = [fwd[k][0] * bwd[k][0], fwd[k][1] * bwd[k][1]];
        let s = g[0] + g[1];
        gamma[k] = [g[0] / s, g[1] / s];
        if k + 1 < n {
            for i in 0..2 {
                for j in 0..2 {
                    xi[i][j] += fwd[k][i] * tr[i][j] * b[k + 1][j] * bwd[k + 1][j] / scale[k + 1];
                }
            }
        }
    }
    Ok(Smoothed { gamma, xi, log_likelihood })
}

/// Scaled forward-backward smoothing over the delay bins.
pub fn forward_backward(obs: &[f64], params: &HmmParams) -> Result<Posterior> {
    let s = smooth(obs, params)?;
    Ok(Posterior { alpha: s.gamma.iter().map(|g| g[1].clamp(0.0, 1.0)).collect(), log_likelihood: s.log_likelihood })
}

/// First bin whose change probability exceeds one half; `None` means no target.
pub fn estimate_k_star(alpha: &[f64]) -> Option<usize> {
    alpha.iter().position(|&a| a > 0.5)
}

/// One EM re-estimation over a set of observation vectors. Returns the new
/// parameters and the total log-likelihood of `history` under `params`.
/// Zero transition probabilities stay zero.
pub fn baum_welch_update(history: &[Vec<f64>], params: &HmmParams) -> Result<(HmmParams, f64)> {
    if history.is_empty() {
        return Err(Error::Data("Baum-Welch needs at least one observation vector".into()));
    }
    let mut init = [0.0; 2];
    let mut xi = [[0.0; 2]; 2];
    let mut w = [0.0; 2];
    let mut wx = [0.0; 2];
    let mut total = 0.0;
    let mut smoothed = Vec::with_capacity(history.len());
    for obs in history {
        let s = smooth(obs, params)?;
        total += s.log_likelihood;
        init[0] += s.gamma[0][0];
        init[1] += s.gamma[0][1];
        for i in 0..2 {
            for j in 0..2 {
                xi[i][j] += s.xi[i][j];
            }
        }
        for (g, o) in s.gamma.iter().zip(obs) {
            let lx = (o.max(0.0) + OBS_EPSILON).ln();
            for i in 0..2 {
                w[i] += g[i];
                wx[i] += g[i] * lx;
            }
        }
        smoothed.push(s);
    }
    let mean = [wx[0] / w[0], wx[1] / w[1]];
    let mut wvar = [0.0; 2];
    for (s, obs) in smoothed.iter().zip(history) {
        for (g, o) in s.gamma.iter().zip(obs) {
            let lx = (o.max(0.0) + OBS_EPSILON).ln();
            for i in 0..2 {
                wvar[i] += g[i] * (lx - mean[i]).powi(2);
            }
        }
    }

    let mut next = *params;
    let n = history.len() as f64;
    next.initial = [init[0] / n, init[1] / n];
    for i in 0..2 {
        let row = xi[i][0] + xi[i][1];
        if row > 0.0 {
            next.transition[i] = [xi[i][0] / row, xi[i][1] / row];
        }
        if w[i] > 0.0 {
            next.emission[i] = LogNormal { location: mean[i], scale: (wvar[i] / w[i]).sqrt().max(SCALE_FLOOR) };
        }
    }
    Ok((next, total))
}

/// Runs `iters` EM steps. The returned trace holds the log-likelihood before
/// each step and after the last one.
pub fn baum_welch(history: &[Vec<f64>], params: &HmmParams, iters: usize) -> Result<(HmmParams, Vec<f64>)> {
    let mut p = *params;
    let mut trace = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let (next, ll) = baum_welch_update(history, &p)?;
        trace.push(ll);
        p = next;
    }
    let last: f64 = history.iter().map(|o| smooth(o, &p).map(|s| s.log_likelihood)).sum::<Result<f64>>()?;
    trace.push(last);
    Ok((p, trace))
}
