//! Synthetic scenarios: a person walking a closed path at constant speed
//! through a room instrumented on two sides, observed by a multi-channel RSS
//! network and one UWB transmitter/receiver pair.
//!
//! RSS follows `r = P_c - L(d) - S + F - eta`, where `S` is a fixed loss while
//! the person stands inside the link ellipse. The person also scatters a
//! weak echo that interferes with each link's static multipath; its relative
//! strength grows with the channel's fade level and decays with the echo's
//! excess path, so faded channels react over a wide area. CIR energies are
//! static taps plus an echo of the person starting at its bistatic delay bin,
//! plus Gaussian noise floored at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{delay_bin_of, Deployment, LinkSet, Point, Rect, SPEED_OF_LIGHT_M_PER_NS};
use crate::rti::RssSample;
use crate::uwb::CirFrame;

const STREAM_FADES: u64 = 1;
const STREAM_RSS: u64 = 2;
const STREAM_CIR: u64 = 3;
const STREAM_PHASES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub channel: u8,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RssModel {
    pub channels: Vec<ChannelSpec>,
    /// Path loss at 1 m.
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    /// Standard deviation of the static per-link, per-channel fade offsets.
    pub fade_std_db: f64,
    /// Loss while the person is inside the link ellipse.
    pub shadow_db: f64,
    /// Excess path length of the shadowing ellipse in meters.
    pub ellipse_excess: f64,
    pub noise_std_db: f64,
    /// Echo-to-static amplitude ratio on the link's strongest channel, for
    /// an echo with zero excess path.
    pub scatter_ratio: f64,
    /// Excess path length over which the echo amplitude falls by `1/e`.
    pub scatter_decay_m: f64,
    /// Round RSS to whole dBm.
    pub quantize: bool,
    /// Seconds per full round over every link and channel.
    pub round_period_s: f64,
    pub packet_loss: f64,
}

impl Default for RssModel {
    fn default() -> Self {
        Self {
            channels: [11u8, 15, 20, 25, 26]
                .iter()
                .map(|&channel| ChannelSpec { channel, tx_power_dbm: 0.0 })
                .collect(),
            reference_loss_db: 40.0,
            path_loss_exponent: 2.0,
            fade_std_db: 4.0,
            shadow_db: 5.0,
            ellipse_excess: 0.02,
            noise_std_db: 1.0,
            scatter_ratio: 1.0,
            scatter_decay_m: 1.0,
            quantize: true,
            round_period_s: 0.4,
            packet_loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    /// Bins after the line-of-sight bin.
    pub delay_bins: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CirModel {
    pub bins: usize,
    pub los_bin: usize,
    pub los_energy: f64,
    pub static_taps: Vec<Tap>,
    /// Mean energy present in every bin.
    pub background: f64,
    pub noise_std: f64,
    /// Mean energy of the echo at the person's bistatic bin.
    pub target_energy: f64,
    /// Per-bin decay of the echo tail after the bistatic bin.
    pub tail_decay: f64,
    pub frame_period_s: f64,
    pub sampling_period_ns: f64,
}

impl Default for CirModel {
    fn default() -> Self {
        Self {
            bins: 64,
            los_bin: 5,
            los_energy: 4.0,
            static_taps: vec![
                Tap { delay_bins: 3, energy: 0.8 },
                Tap { delay_bins: 12, energy: 0.5 },
                Tap { delay_bins: 25, energy: 0.3 },
            ],
            background: 0.2,
            noise_std: 0.05,
            target_energy: 1.0,
            tail_decay: 0.97,
            frame_period_s: 0.1,
            sampling_period_ns: 1.0,
        }
    }
}

impl CirModel {
    /// Echo-to-noise ratio in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.target_energy / self.noise_std).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub deployment: Deployment,
    /// Closed walking loop. Empty means nobody enters the room.
    pub path: Vec<Point>,
    /// Meters per second.
    pub speed: f64,
    /// Empty-room prefix before the walk starts.
    pub calibration_seconds: f64,
    pub walk_seconds: f64,
    pub seed: u64,
    #[serde(default)]
    pub rss: RssModel,
    #[serde(default)]
    pub cir: CirModel,
}

impl Scenario {
    pub fn duration(&self) -> f64 {
        self.calibration_seconds + self.walk_seconds
    }

    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.speed > 0.0) {
            return bad(format!("speed must be positive, got {}", self.speed));
        }
        if !(self.calibration_seconds >= 0.0) || !(self.walk_seconds >= 0.0) {
            return bad("durations must be non-negative".into());
        }
        if let Some(p) = self.path.iter().find(|p| !self.deployment.room.contains(p)) {
            return bad(format!("path point ({}, {}) lies outside the room", p.x, p.y));
        }
        let r = &self.rss;
        if r.channels.is_empty() {
            return bad("RSS model needs at least one channel".into());
        }
        if !(r.round_period_s > 0.0) || !(0.0..1.0).contains(&r.packet_loss) {
            return bad("RSS round period must be positive and packet loss in [0, 1)".into());
        }
        if r.noise_std_db < 0.0 || r.fade_std_db < 0.0 || r.scatter_ratio < 0.0 {
            return bad("RSS standard deviations must be non-negative".into());
        }
        let c = &self.cir;
        if c.los_bin >= c.bins {
            return bad(format!("LoS bin {} outside {} CIR bins", c.los_bin, c.bins));
        }
        if c.static_taps.iter().any(|t| c.los_bin + t.delay_bins >= c.bins) {
            return bad("static tap beyond the last CIR bin".into());
        }
        if !(c.frame_period_s > 0.0) || !(c.sampling_period_ns > 0.0) || c.noise_std < 0.0 {
            return bad("CIR periods must be positive and noise non-negative".into());
        }
        Ok(())
    }

    fn path_length(&self) -> f64 {
        let n = self.path.len();
        (0..n).map(|i| self.path[i].dist(&self.path[(i + 1) % n])).sum()
    }

    /// Person's position at `t`, `None` while the room is empty.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        if self.path.is_empty() || t < self.calibration_seconds || t > self.duration() {
            return None;
        }
        let total = self.path_length();
        if self.path.len() == 1 || total <= 0.0 {
            return Some(self.path[0]);
        }
        let mut s = ((t - self.calibration_seconds) * self.speed) % total;
        let n = self.path.len();
        for i in 0..n {
            let (a, b) = (self.path[i], self.path[(i + 1) % n]);
            let seg = a.dist(&b);
            if s <= seg && seg > 0.0 {
                let f = s / seg;
                return Some(Point::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)));
            }
            s -= seg;
        }
        Some(self.path[0])
    }

    /// True bistatic delay bin of the person at `t`.
    pub fn k_star_at(&self, t: f64) -> Option<usize> {
        let d = &self.deployment;
        self.position_at(t)
            .map(|p| delay_bin_of(&p, &d.uwb_tx, &d.uwb_rx, self.cir.sampling_period_ns, self.cir.los_bin))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Static fade offsets `F[link][channel]`.
    pub fn fade_offsets(&self, n_links: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng(STREAM_FADES);
        let normal = Normal::new(0.0, self.rss.fade_std_db.max(0.0)).expect("finite std");
        (0..n_links).map(|_| self.rss.channels.iter().map(|_| normal.sample(&mut rng)).collect()).collect()
    }

    /// Empty-room mean RSS per link and channel, before quantization.
    pub fn static_means(&self, links: &LinkSet) -> Vec<Vec<f64>> {
        let fades = self.fade_offsets(links.len());
        links
            .links
            .iter()
            .zip(&fades)
            .map(|(link, f)| {
                let loss = self.rss.reference_loss_db + 10.0 * self.rss.path_loss_exponent * link.length.log10();
                self.rss.channels.iter().zip(f).map(|(c, f)| c.tx_power_dbm - loss + f).collect()
            })
            .collect()
    }
}

/// Carrier wavelength of an IEEE 802.15.4 channel in the 2.4 GHz band.
pub fn channel_wavelength_m(channel: u8) -> f64 {
    let mhz = 2405.0 + 5.0 * (f64::from(channel) - 11.0);
    SPEED_OF_LIGHT_M_PER_NS * 1e3 / mhz
}

/// RSS change in dB when an echo of relative amplitude `ratio` and phase
/// `phase` adds to the static signal. Nulls are clipped at -26 dB.
fn interference_db(ratio: f64, phase: f64) -> f64 {
    let (re, im) = (1.0 + ratio * phase.cos(), ratio * phase.sin());
    20.0 * (re * re + im * im).sqrt().max(0.05).log10()
}

/// Per-timestamp truth: position and bistatic bin, both absent while the room is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t: f64,
    pub position: Option<Point>,
    pub k_star: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    /// Truth sampled at every CIR frame time.
    pub fn of(scenario: &Scenario) -> Self {
        let records = frame_times(scenario.duration(), scenario.cir.frame_period_s)
            .map(|t| TruthRecord { t, position: scenario.position_at(t), k_star: scenario.k_star_at(t) })
            .collect();
        Self { records }
    }

    /// Record closest in time to `t`; ties go to the earlier record.
    pub fn nearest(&self, t: f64) -> Option<&TruthRecord> {
        crate::eval::nearest(&self.records, t)
    }
}

fn frame_times(duration: f64, period: f64) -> impl Iterator<Item = f64> {
    let n = (duration / period + 1e-9).floor() as usize;
    (0..=n).map(move |i| i as f64 * period)
}

/// RSS stream over the whole scenario. Each round visits the channels in
/// order; within a channel every node transmits once, in index order, and
/// its transmission yields one sample for every link to a higher-index node.
/// Link ids follow [`LinkSet::all_pairs`].
pub fn generate_rss_stream(scenario: &Scenario) -> Result<Vec<RssSample>> {
    scenario.validate()?;
    let nodes = &scenario.deployment.rss_nodes;
    let links = LinkSet::all_pairs(nodes)?;
    let model = &scenario.rss;
    let means = scenario.static_means(&links);
    // echo amplitude relative to the static signal grows with the fade level
    let ratio: Vec<Vec<f64>> = means
        .iter()
        .map(|m| {
            let best = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m.iter().map(|v| model.scatter_ratio * 10f64.powf((best - v) / 20.0)).collect()
        })
        .collect();
    let mut phase_rng = scenario.rng(STREAM_PHASES);
    let phases: Vec<Vec<f64>> = (0..links.len())
        .map(|_| model.channels.iter().map(|_| phase_rng.gen_range(0.0..std::f64::consts::TAU)).collect())
        .collect();
    let wavelengths: Vec<f64> = model.channels.iter().map(|c| channel_wavelength_m(c.channel)).collect();
    let mut by_tx: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (l, link) in links.links.iter().enumerate() {
        by_tx[link.tx.min(link.rx)].push(l);
    }

    let mut rng = scenario.rng(STREAM_RSS);
    let noise = Normal::new(0.0, model.noise_std_db).expect("finite std");
    let slots = (model.channels.len() * nodes.len()) as f64;
    let slot = model.round_period_s / slots;
    let rounds = (scenario.duration() / model.round_period_s + 1e-9).floor() as usize;

    let mut out = Vec::with_capacity(rounds * model.channels.len() * links.len());
    for round in 0..rounds {
        for (ci, ch) in model.channels.iter().enumerate() {
            for (node, tx_links) in by_tx.iter().enumerate() {
                let t = round as f64 * model.round_period_s + (ci * nodes.len() + node) as f64 * slot;
                let person = scenario.position_at(t);
                for &l in tx_links {
                    let link = &links.links[l];
                    let mut rss = means[l][ci] - noise.sample(&mut rng);
                    if let Some(p) = person {
                        let excess = p.dist(&link.tx_pos) + p.dist(&link.rx_pos) - link.length;
                        if excess < model.ellipse_excess {
                            rss -= model.shadow_db;
                        }
                        if model.scatter_ratio > 0.0 {
                            let r = ratio[l][ci] * (-excess / model.scatter_decay_m).exp();
                            let phase = std::f64::consts::TAU * excess / wavelengths[ci] + phases[l][ci];
                            rss += interference_db(r, phase);
                        }
                    }
                    let lost = model.packet_loss > 0.0 && rng.gen::<f64>() < model.packet_loss;
                    if lost {
                        continue;
                    }
                    let rss = if model.quantize { rss.round() } else { rss };
                    out.push(RssSample { t, link: l, channel: ch.channel, rss });
                }
            }
        }
    }
    Ok(out)
}

/// Noise-free CIR energies with the person at `person`.
fn cir_profile(scenario: &Scenario, person: Option<Point>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = &scenario.cir;
    let mut e = vec![c.background; c.bins];
    e[c.los_bin] += c.los_energy;
    for tap in &c.static_taps {
        e[c.los_bin + tap.delay_bins] += tap.energy;
    }
    if let Some(p) = person {
        let d = &scenario.deployment;
        let k = delay_bin_of(&p, &d.uwb_tx, &d.uwb_rx, c.sampling_period_ns, c.los_bin);
        let mut amp = c.target_energy;
        for v in e.iter_mut().skip(k) {
            let fade: f64 = Exp1.sample(rng);
            *v += amp * fade;
            amp *= c.tail_decay;
        }
    }
    e
}

/// One CIR every frame period from `t = 0`.
pub fn generate_cir_stream(scenario: &Scenario) -> Result<Vec<CirFrame>> {
    scenario.validate()?;
    let c = &scenario.cir;
    let mut rng = scenario.rng(STREAM_CIR);
    let noise = Normal::new(0.0, c.noise_std).expect("finite std");
    Ok(frame_times(scenario.duration(), c.frame_period_s)
        .map(|t| {
            let energies = cir_profile(scenario, scenario.position_at(t), &mut rng)
                .into_iter()
                .map(|v| (v + noise.sample(&mut rng)).max(0.0))
                .collect();
            CirFrame { t, energies }
        })
        .collect())
}

/// Nodes spaced `spacing` apart along a vertical line at `x`, centered on the room.
fn column(x: f64, room: &Rect, count: usize, spacing: f64) -> Vec<Point> {
    let span = spacing * (count.saturating_sub(1)) as f64;
    let y0 = room.center().y - span / 2.0;
    (0..count).map(|i| Point::new(x, y0 + i as f64 * spacing)).collect()
}

/// Rectangular loop inset `margin` from the walls, counter-clockwise.
pub fn loop_path(room: &Rect, margin: f64) -> Vec<Point> {
    vec![
        Point::new(room.x_min + margin, room.y_min + margin),
        Point::new(room.x_max - margin, room.y_min + margin),
        Point::new(room.x_max - margin, room.y_max - margin),
        Point::new(room.x_min + margin, room.y_max - margin),
    ]
}

/// 3.82 m by 5.49 m room, 17 and 16 RSS sensors 0.305 m apart outside the
/// two long walls, UWB radios 1 m apart outside the left wall.
pub fn study_room(seed: u64) -> Scenario {
    let room = Rect::new(0.0, 0.0, 3.82, 5.49);
    let mut nodes = column(-0.15, &room, 17, 0.305);
    nodes.extend(column(room.x_max + 0.15, &room, 16, 0.305));
    let cy = room.center().y;
    Scenario {
        deployment: Deployment {
            room,
            rss_nodes: nodes,
            uwb_tx: Point::new(-0.3, cy - 0.5),
            uwb_rx: Point::new(-0.3, cy + 0.5),
        },
        path: loop_path(&room, 0.6),
        speed: 0.5,
        calibration_seconds: 20.0,
        walk_seconds: 56.0,
        seed,
        rss: RssModel::default(),
        cir: CirModel::default(),
    }
}

/// UWB radio separation options of the motel room.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotelUwb {
    /// 0.9 m apart.
    A,
    /// 2.7 m apart.
    B,
}

/// 3.96 m by 7.11 m room, 10 RSS sensors outside each long wall, UWB radios
/// outside the left wall.
pub fn motel(seed: u64, uwb: MotelUwb) -> Scenario {
    let room = Rect::new(0.0, 0.0, 3.96, 7.11);
    let spacing = 0.7;
    let mut nodes = column(-0.15, &room, 10, spacing);
    nodes.extend(column(room.x_max + 0.15, &room, 10, spacing));
    let half = match uwb {
        MotelUwb::A => 0.45,
        MotelUwb::B => 1.35,
    };
    let cy = room.center().y;
    Scenario {
        deployment: Deployment {
            room,
            rss_nodes: nodes,
            uwb_tx: Point::new(-0.3, cy - half),
            uwb_rx: Point::new(-0.3, cy + half),
        },
        path: loop_path(&room, 0.6),
        speed: 0.5,
        calibration_seconds: 20.0,
        walk_seconds: 70.0,
        seed,
        rss: RssModel::default(),
        cir: CirModel::default(),
    }
}
