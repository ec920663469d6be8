//! End-to-end processing of recorded RSS and CIR streams.
//!
//! The RSS and CIR streams are reduced independently (link measurements and
//! images on one side, change profiles on the other), then paired by
//! timestamp, fused, and fed to the tracker.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{Config, RtiMethod, UwbMethod};
use crate::error::{Error, Result};
use crate::fusion::{
    fuse_product, fuse_x_from_y, locate, synchronize, EstimateStatus, FusionMethod, JointInversion, PositionEstimate,
};
use crate::geometry::{LinkSet, Point, VoxelGrid};
use crate::image::Image;
use crate::rti::{
    ab_link_measurement, calibrate, channel_index, compute_weight_matrix, estimate_image, projection_with_prior,
    PriorPrecision, RssSample, VbLinkState,
};
use crate::tracking::{TrackEvent, Tracker};
use crate::uwb::{
    baum_welch, detect_los_bin, estimate_k_star, forward_backward, observation_vector, uwb_image, CirCalibration,
    CirFrame, DelayMap, VbNormalizer,
};

/// Frames used to locate the line-of-sight bin when it is not configured.
const LOS_DETECTION_FRAMES: usize = 20;

/// Geometry-dependent matrices for one deployment and sensor subset. Building
/// the projection dominates the cost of a run, so a model is meant to be
/// reused across traces recorded with the same deployment.
#[derive(Debug)]
pub struct Model {
    pub grid: VoxelGrid,
    pub links: LinkSet,
    /// Trace link id (pair index over all deployment nodes) to row of `weights`.
    link_rows: Vec<Option<usize>>,
    pub weights: DMatrix<f64>,
    pub projection: DMatrix<f64>,
    prior: Arc<PriorPrecision>,
    joint: Mutex<BTreeMap<(usize, usize), Arc<JointInversion>>>,
}

impl Model {
    /// `nodes` selects a subset of the deployment's RSS nodes; `None` uses all.
    pub fn new(config: &Config, nodes: Option<&[usize]>) -> Result<Self> {
        let grid = VoxelGrid::new(&config.deployment.room, config.rti.voxel_width)?;
        let prior = Arc::new(PriorPrecision::new(&grid, &config.rti)?);
        Self::with_prior(config, nodes, prior)
    }

    /// Same as [`Model::new`] with a precomputed prior for the same grid.
    pub fn with_prior(config: &Config, nodes: Option<&[usize]>, prior: Arc<PriorPrecision>) -> Result<Self> {
        config.validate()?;
        let all = &config.deployment.rss_nodes;
        let grid = VoxelGrid::new(&config.deployment.room, config.rti.voxel_width)?;
        if prior.scaled_inverse.nrows() != grid.len() {
            return Err(Error::Dimension {
                what: "prior voxels",
                expected: grid.len(),
                got: prior.scaled_inverse.nrows(),
            });
        }
        let selected: BTreeSet<usize> = match nodes {
            Some(n) => n.iter().copied().collect(),
            None => (0..all.len()).collect(),
        };
        if let Some(&bad) = selected.iter().find(|&&i| i >= all.len()) {
            return Err(Error::Config(format!("sensor {bad} does not exist ({} deployed)", all.len())));
        }
        let mut pairs = Vec::new();
        let mut link_rows = Vec::new();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if selected.contains(&i) && selected.contains(&j) {
                    link_rows.push(Some(pairs.len()));
                    pairs.push((i, j));
                } else {
                    link_rows.push(None);
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Config("sensor subset forms no links".into()));
        }
        let links = LinkSet::from_pairs(all, &pairs)?;
        let weights = compute_weight_matrix(&links, &grid, config.rti.ellipse_excess)?;
        let projection = projection_with_prior(&weights, &prior)?;
        debug!("model: {} voxels, {} links", grid.len(), links.len());
        Ok(Self { grid, links, link_rows, weights, projection, prior, joint: Mutex::new(BTreeMap::new()) })
    }

    pub fn prior(&self) -> Arc<PriorPrecision> {
        Arc::clone(&self.prior)
    }

    fn joint(&self, delays: &DelayMap, bins: usize) -> Result<Arc<JointInversion>> {
        let key = (delays.los_bin, bins);
        let mut cache = self.joint.lock().expect("joint cache poisoned");
        if let Some(j) = cache.get(&key) {
            return Ok(Arc::clone(j));
        }
        let j = Arc::new(JointInversion::new(&self.weights, delays, bins, &self.prior)?);
        cache.insert(key, Arc::clone(&j));
        Ok(j)
    }
}

/// One RTI frame: link measurements and the reconstructed image.
#[derive(Debug, Clone, PartialEq)]
pub struct RtiFrame {
    pub t: f64,
    pub y: Vec<f64>,
    pub image: Image,
}

/// Change profile of one CIR window.
#[derive(Debug, Clone, PartialEq)]
pub struct UwbFrame {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub k_hat: Option<usize>,
}

/// One fused frame as written to the estimates file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRecord {
    pub t: f64,
    pub status: EstimateStatus,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub k_hat: Option<usize>,
    /// Most recently updated confirmed track after this frame.
    pub track: Option<u64>,
    pub track_x: Option<f64>,
    pub track_y: Option<f64>,
}

impl EstimateRecord {
    /// Reported position: the confirmed track when there is one, otherwise
    /// the frame's own estimate.
    pub fn reported(&self) -> Option<Point> {
        match (self.track_x, self.track_y, self.x, self.y) {
            (Some(x), Some(y), _, _) => Some(Point::new(x, y)),
            (_, _, Some(x), Some(y)) => Some(Point::new(x, y)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub estimates: Vec<EstimateRecord>,
    pub events: Vec<TrackEvent>,
    pub uwb: Vec<UwbFrame>,
    pub los_bin: Option<usize>,
}

impl RunOutput {
    pub fn reported_positions(&self) -> Vec<(f64, Point)> {
        self.estimates.iter().filter_map(|e| e.reported().map(|p| (e.t, p))).collect()
    }

    pub fn confirmed_any(&self) -> bool {
        self.events.iter().any(|e| e.kind == crate::tracking::TrackEventKind::Confirmed)
    }
}

fn check_sorted(ts: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for (i, t) in ts.enumerate() {
        if !t.is_finite() || t < last {
            return Err(Error::Data(format!("{what} record {i} has timestamp {t} out of order")));
        }
        last = t;
    }
    Ok(())
}

/// Reduces the RSS stream to RTI frames. A frame closes once every (link,
/// channel) pair has reported, or early when a pair reports twice; pairs that
/// missed the frame keep their previous reading.
pub fn rti_frames(model: &Model, config: &Config, samples: &[RssSample]) -> Result<Vec<RtiFrame>> {
    check_sorted(samples.iter().map(|s| s.t), "RSS")?;
    let channels: Vec<u8> = samples.iter().map(|s| s.channel).collect::<BTreeSet<_>>().into_iter().collect();
    if channels.is_empty() {
        return Err(Error::Data("RSS trace is empty".into()));
    }
    let n_links = model.links.len();
    let n_ch = channels.len();
    let local = |s: &RssSample| -> Result<Option<RssSample>> {
        match model.link_rows.get(s.link) {
            Some(row) => Ok(row.map(|l| RssSample { link: l, ..*s })),
            None => {
                Err(Error::Data(format!("RSS link id {} beyond {} deployment links", s.link, model.link_rows.len())))
            }
        }
    };
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        if let Some(r) = local(s)? {
            rows.push(r);
        }
    }

    let params = &config.rti;
    let cal_end = config.calibration_seconds;
    let (start, ab) = match config.methods.rti {
        RtiMethod::Ab => {
            let cal: Vec<RssSample> = rows.iter().copied().filter(|s| s.t < cal_end).collect();
            if cal.is_empty() {
                return Err(Error::MissingCalibration { method: "AB-RTI" });
            }
            let table = calibrate(&cal, n_links, &channels)?;
            let ranking = table.ranking(params.m);
            (cal.len(), Some((table, ranking)))
        }
        RtiMethod::Vb => (0, None),
    };
    let mut current: Vec<Vec<f64>> = match &ab {
        Some((table, _)) => table.mean.clone(),
        None => vec![vec![f64::NAN; n_ch]; n_links],
    };
    let mut vb: Vec<VbLinkState> = (0..n_links).map(|_| VbLinkState::new(n_ch, params.n_mu)).collect();
    let mut fresh = vec![vec![false; n_ch]; n_links];
    let mut n_fresh = 0usize;
    let mut frames = Vec::new();

    let emit = |t: f64, current: &[Vec<f64>], vb: &[VbLinkState]| -> Result<RtiFrame> {
        let y: Vec<f64> = match &ab {
            Some((table, ranking)) => (0..n_links)
                .map(|l| ab_link_measurement(&table.mean[l], ranking.selected(l), &current[l]).map(|d| -d))
                .collect::<Result<_>>()?,
            None => vb.iter().map(|s| s.measurement(params.m, params.n_s).unwrap_or(0.0)).collect(),
        };
        let image = estimate_image(&model.projection, &y)?;
        Ok(RtiFrame { t, y, image })
    };

    let mut last_t = 0.0;
    for s in &rows[start..] {
        let c = channel_index(&channels, s.channel).expect("channel collected above");
        if fresh[s.link][c] {
            frames.push(emit(last_t, &current, &vb)?);
            fresh.iter_mut().for_each(|f| f.fill(false));
            n_fresh = 0;
        }
        current[s.link][c] = s.rss;
        vb[s.link].push(c, s.rss);
        fresh[s.link][c] = true;
        n_fresh += 1;
        last_t = s.t;
        if n_fresh == n_links * n_ch {
            frames.push(emit(s.t, &current, &vb)?);
            fresh.iter_mut().for_each(|f| f.fill(false));
            n_fresh = 0;
        }
    }
    if n_fresh > 0 {
        frames.push(emit(last_t, &current, &vb)?);
    }
    Ok(frames)
}

/// Line-of-sight bin from the configuration, else from the first frames.
pub fn los_bin(config: &Config, frames: &[CirFrame]) -> Result<usize> {
    if let Some(k) = config.uwb.los_bin {
        return Ok(k);
    }
    detect_los_bin(&frames[..frames.len().min(LOS_DETECTION_FRAMES)])
        .ok_or_else(|| Error::Data("cannot locate the line-of-sight bin in an all-zero CIR".into()))
}

/// Reduces the CIR stream to change profiles and delay estimates.
pub fn uwb_frames(config: &Config, frames: &[CirFrame]) -> Result<Vec<UwbFrame>> {
    check_sorted(frames.iter().map(|f| f.t), "CIR")?;
    let Some(first) = frames.first() else {
        return Err(Error::Data("CIR trace is empty".into()));
    };
    let bins = first.energies.len();
    for f in frames {
        f.validate(bins)?;
    }
    let n_u = config.uwb.n_u;
    match config.methods.uwb {
        UwbMethod::None => Ok(Vec::new()),
        UwbMethod::Vb => {
            let mut vb = VbNormalizer::new(n_u, config.uwb.beta(), config.uwb.normalizer_floor);
            let mut out = Vec::new();
            for f in frames {
                if let Some(alpha) = vb.push(f)? {
                    let k_hat = alpha.iter().position(|&a| a > config.vb_change_threshold);
                    out.push(UwbFrame { t: f.t, alpha, k_hat });
                }
            }
            Ok(out)
        }
        UwbMethod::Hmm => {
            let cal_end = config.calibration_seconds;
            let n_cal = frames.partition_point(|f| f.t < cal_end);
            let sliding = config.sliding_calibration_frames;
            let fixed = if sliding == 0 {
                if n_cal < 2 {
                    return Err(Error::MissingCalibration { method: "HMM-UWB" });
                }
                Some(CirCalibration::new(&frames[..n_cal], config.uwb.variance_floor)?)
            } else {
                None
            };
            let mut obs = Vec::new();
            for i in n_cal.max(n_u - 1)..frames.len() {
                let lo = i + 1 - n_u;
                let window = &frames[lo..=i];
                let o = match &fixed {
                    Some(cal) => observation_vector(cal, window)?,
                    None if lo >= sliding => {
                        let cal = CirCalibration::new(&frames[lo - sliding..lo], config.uwb.variance_floor)?;
                        observation_vector(&cal, window)?
                    }
                    None => continue,
                };
                obs.push((frames[i].t, o));
            }
            let mut hmm = config.hmm;
            if config.baum_welch_iterations > 0 && !obs.is_empty() {
                let history: Vec<Vec<f64>> = obs.iter().map(|(_, o)| o.clone()).collect();
                let (fitted, trace) = baum_welch(&history, &hmm, config.baum_welch_iterations)?;
                debug!("Baum-Welch log-likelihood trace {trace:?}");
                hmm = fitted;
            }
            let mut out = Vec::with_capacity(obs.len());
            for (t, o) in obs {
                match forward_backward(&o, &hmm) {
                    Ok(post) => {
                        let k_hat = estimate_k_star(&post.alpha);
                        out.push(UwbFrame { t, alpha: post.alpha, k_hat });
                    }
                    Err(Error::DegenerateObservation(k)) => warn!("CIR window at t={t}: degenerate bin {k}, skipped"),
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        }
    }
}

/// Runs the whole chain on one pair of traces.
pub fn run(model: &Model, config: &Config, rss: &[RssSample], cir: &[CirFrame]) -> Result<RunOutput> {
    config.validate()?;
    let rti = rti_frames(model, config, rss)?;
    let grid = &model.grid;
    let t_e = config.empty_area_threshold;
    let mut tracker = Tracker::new(config.tracker);
    let mut out = RunOutput::default();

    let mut step = |est: PositionEstimate, k_hat: Option<usize>, out: &mut RunOutput| {
        out.events.extend(tracker.update(&est));
        let track = tracker
            .confirmed()
            .filter(|t| t.frames_since_update < config.tracker.window)
            .max_by(|a, b| a.last_update.total_cmp(&b.last_update).then(b.id.cmp(&a.id)))
            .map(|t| (t.id, t.position));
        out.estimates.push(EstimateRecord {
            t: est.t,
            status: est.status,
            x: est.position.map(|p| p.x),
            y: est.position.map(|p| p.y),
            k_hat,
            track: track.map(|(id, _)| id),
            track_x: track.map(|(_, p)| p.x),
            track_y: track.map(|(_, p)| p.y),
        });
    };

    if config.methods.uwb == UwbMethod::None {
        for f in &rti {
            step(locate(&f.image, t_e, grid, f.t), None, &mut out);
        }
        return Ok(out);
    }

    let uwb = uwb_frames(config, cir)?;
    let los = los_bin(config, cir)?;
    let bins = cir[0].energies.len();
    let delays = DelayMap::new(grid, &config.deployment, config.uwb.sampling_period_ns, los);
    let joint = match config.methods.fusion {
        FusionMethod::Joint => Some(model.joint(&delays, bins)?),
        _ => None,
    };
    let rti_ts: Vec<f64> = rti.iter().map(|f| f.t).collect();
    let uwb_ts: Vec<f64> = uwb.iter().map(|f| f.t).collect();
    for (r, u) in synchronize(&rti_ts, &uwb_ts) {
        let (rf, uf) = (&rti[r], &uwb[u]);
        let est = match config.methods.fusion {
            FusionMethod::Product => {
                let img = uwb_image(&uf.alpha, &delays);
                fuse_product(&rf.image, &img, t_e, grid, (rf.t, uf.t))?.1
            }
            FusionMethod::XFromY => {
                let img = uwb_image(&uf.alpha, &delays);
                fuse_x_from_y(&rf.image, &img, t_e, grid, uf.t)?
            }
            FusionMethod::Joint => {
                joint.as_ref().expect("built above").fuse(&rf.y, &uf.alpha, t_e, grid, (rf.t, uf.t))?.1
            }
        };
        step(est, uf.k_hat, &mut out);
    }
    out.uwb = uwb;
    out.los_bin = Some(los);
    Ok(out)
}
