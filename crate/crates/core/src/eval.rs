//! Localization error metrics and the uniform-random baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::sim::TruthRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Estimate/truth pairs that entered the metrics.
    pub frames: usize,
    pub rms_l2: f64,
    pub rms_x: f64,
    pub rms_y: f64,
    /// L2 mean squared error over room area.
    pub aou: f64,
}

impl Metrics {
    fn from_sums(frames: usize, sx: f64, sy: f64, area: f64) -> Self {
        let n = frames as f64;
        Self {
            frames,
            rms_l2: ((sx + sy) / n).sqrt(),
            rms_x: (sx / n).sqrt(),
            rms_y: (sy / n).sqrt(),
            aou: (sx + sy) / n / area,
        }
    }
}

/// Percent reduction of `with`'s area of uncertainty relative to `baseline`.
pub fn aou_reduction(baseline: &Metrics, with: &Metrics) -> f64 {
    100.0 * (1.0 - with.aou / baseline.aou)
}

/// Truth record nearest in time to `t`; ties go to the earlier record.
pub(crate) fn nearest(truth: &[TruthRecord], t: f64) -> Option<&TruthRecord> {
    let i = truth.partition_point(|r| r.t < t);
    match (i.checked_sub(1).map(|j| &truth[j]), truth.get(i)) {
        (Some(b), Some(a)) => Some(if t - b.t <= a.t - t { b } else { a }),
        (b, a) => b.or(a),
    }
}

/// Pairs each estimate with the truth position nearest in time. Estimates
/// whose nearest truth has the room empty are dropped.
pub fn align(estimates: &[(f64, Point)], truth: &[TruthRecord]) -> Result<Vec<(Point, Point)>> {
    if estimates.is_empty() {
        return Err(Error::Data("no position estimates to evaluate".into()));
    }
    let (Some(first), Some(last)) = (truth.first(), truth.last()) else {
        return Err(Error::Data("ground truth is empty".into()));
    };
    let (lo, hi) =
        estimates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (t, _)| (lo.min(*t), hi.max(*t)));
    if hi < first.t || lo > last.t {
        return Err(Error::Data(format!(
            "estimate times [{lo}, {hi}] and truth times [{}, {}] are disjoint",
            first.t, last.t
        )));
    }
    Ok(estimates.iter().filter_map(|(t, p)| nearest(truth, *t).and_then(|r| r.position).map(|q| (*p, q))).collect())
}

pub fn evaluate(estimates: &[(f64, Point)], truth: &[TruthRecord], room: &Rect) -> Result<Metrics> {
    let pairs = align(estimates, truth)?;
    if pairs.is_empty() {
        return Err(Error::Data("no estimate falls on a frame with the person present".into()));
    }
    let (sx, sy) =
        pairs.iter().fold((0.0, 0.0), |(sx, sy), (e, q)| (sx + (e.x - q.x).powi(2), sy + (e.y - q.y).powi(2)));
    Ok(Metrics::from_sums(pairs.len(), sx, sy, room.area()))
}

/// Uniform-random guesses inside the room, one for every truth position.
pub fn random_baseline(truth_positions: &[Point], room: &Rect, seed: u64) -> Result<Metrics> {
    if truth_positions.is_empty() {
        return Err(Error::Data("no truth positions for the random baseline".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sx, sy) = truth_positions.iter().fold((0.0, 0.0), |(sx, sy), q| {
        let x = rng.gen_range(room.x_min..room.x_max);
        let y = rng.gen_range(room.y_min..room.y_max);
        (sx + (x - q.x).powi(2), sy + (y - q.y).powi(2))
    });
    Ok(Metrics::from_sums(truth_positions.len(), sx, sy, room.area()))
}

/// Expected random-baseline errors: for a uniform guess on `[a, b]` against
/// `x`, `E[(u - x)^2] = (b - a)^2 / 12 + ((a + b) / 2 - x)^2`.
pub fn random_baseline_expected(truth_positions: &[Point], room: &Rect) -> Result<Metrics> {
    if truth_positions.is_empty() {
        return Err(Error::Data("no truth positions for the random baseline".into()));
    }
    let c = room.center();
    let (sx, sy) = truth_positions.iter().fold((0.0, 0.0), |(sx, sy), q| {
        (
            sx + room.width().powi(2) / 12.0 + (c.x - q.x).powi(2),
            sy + room.height().powi(2) / 12.0 + (c.y - q.y).powi(2),
        )
    });
    Ok(Metrics::from_sums(truth_positions.len(), sx, sy, room.area()))
}
