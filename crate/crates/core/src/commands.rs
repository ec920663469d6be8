//! The four command-line operations, callable without the binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Methods, RtiMethod, UwbMethod};
use crate::error::{Error, Result};
use crate::eval::{align, aou_reduction, evaluate, random_baseline, random_baseline_expected, Metrics};
use crate::fusion::FusionMethod;
use crate::geometry::Point;
use crate::pipeline::{run, EstimateRecord, Model, RunOutput};
use crate::rti::{PriorPrecision, RssSample};
use crate::sim::{generate_cir_stream, generate_rss_stream, GroundTruth, Scenario, TruthRecord};
use crate::trace;
use crate::uwb::CirFrame;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateSummary {
    pub rss_records: usize,
    pub cir_records: usize,
    pub truth_records: usize,
}

/// Config matching a scenario: its deployment, calibration length, seed and
/// CIR sampling period replace the corresponding fields of `base`.
pub fn resolve_config(base: &Config, scenario: &Scenario) -> Config {
    let mut c = base.clone();
    c.deployment = scenario.deployment.clone();
    c.calibration_seconds = scenario.calibration_seconds;
    c.seed = scenario.seed;
    c.uwb.sampling_period_ns = scenario.cir.sampling_period_ns;
    c
}

/// Writes `rss.jsonl`, `cir.jsonl`, `truth.csv` and `resolved-config.json`.
pub fn cmd_simulate(config: &Config, scenario: &Scenario, out: &Path) -> Result<SimulateSummary> {
    scenario.validate()?;
    let resolved = resolve_config(config, scenario);
    resolved.validate()?;
    ensure_dir(out)?;
    let rss = generate_rss_stream(scenario)?;
    let cir = generate_cir_stream(scenario)?;
    let truth = GroundTruth::of(scenario);
    let summary = SimulateSummary {
        rss_records: trace::write_rss(&out.join(trace::RSS_FILE), &rss)?,
        cir_records: trace::write_cir(&out.join(trace::CIR_FILE), &cir)?,
        truth_records: truth.records.len(),
    };
    trace::write_truth(&out.join(trace::TRUTH_FILE), &truth.records)?;
    resolved.save(&out.join(trace::CONFIG_FILE))?;
    info!("simulate: {summary:?} -> {}", out.display());
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct EstimateRow {
    t: f64,
    status: String,
    x: Option<f64>,
    y: Option<f64>,
    k_hat: Option<usize>,
    track: Option<u64>,
    track_x: Option<f64>,
    track_y: Option<f64>,
}

fn write_estimates_csv(path: &Path, estimates: &[EstimateRecord]) -> Result<()> {
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let c = trace::canonical;
    for e in estimates {
        let status = match serde_json::to_value(e.status) {
            Ok(serde_json::Value::String(s)) => s,
            _ => unreachable!("status serializes to a string"),
        };
        w.serialize(EstimateRow {
            t: c(e.t),
            status,
            x: e.x.map(c),
            y: e.y.map(c),
            k_hat: e.k_hat,
            track: e.track,
            track_x: e.track_x.map(c),
            track_y: e.track_y.map(c),
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs the pipeline on in-memory traces and writes `estimates.jsonl`,
/// `estimates.csv` and `tracks.jsonl` into `out`.
pub fn track_traces(config: &Config, rss: &[RssSample], cir: &[CirFrame], out: &Path) -> Result<RunOutput> {
    let model = Model::new(config, None)?;
    let result = run(&model, config, rss, cir)?;
    ensure_dir(out)?;
    trace::write_jsonl(&out.join(trace::ESTIMATES_FILE), &result.estimates)?;
    write_estimates_csv(&out.join(trace::ESTIMATES_CSV), &result.estimates)?;
    trace::write_jsonl(&out.join(trace::TRACKS_FILE), &result.events)?;
    info!(
        "track {}: {} estimates, {} track events -> {}",
        config.methods.label(),
        result.estimates.len(),
        result.events.len(),
        out.display()
    );
    Ok(result)
}

/// Reads the traces in `traces` and runs [`track_traces`].
pub fn cmd_track(config: &Config, traces: &Path, out: &Path) -> Result<RunOutput> {
    config.validate()?;
    let (rss, cir) = trace::read_traces(traces)?;
    track_traces(config, &rss, &cir, out)
}

/// Evaluation of one run against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Metrics,
    /// Uniform guesses inside the room, one per evaluated frame, no gating.
    pub random: Metrics,
    /// Expected value of the random baseline over the same frames.
    pub random_expected: Metrics,
    pub baseline: Option<Metrics>,
    /// Percent reduction of AoU relative to `baseline`.
    pub aou_reduction: Option<f64>,
    pub aou_reduction_vs_random: f64,
}

impl Report {
    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<16} {:>7} {:>9} {:>9} {:>9} {:>9}", "", "frames", "rms_l2", "rms_x", "rms_y", "aou").unwrap();
        let mut row = |name: &str, m: &Metrics| {
            writeln!(
                s,
                "{:<16} {:>7} {:>9.3} {:>9.3} {:>9.3} {:>9.4}",
                name, m.frames, m.rms_l2, m.rms_x, m.rms_y, m.aou
            )
            .unwrap();
        };
        row("method", &self.method);
        if let Some(b) = &self.baseline {
            row("baseline", b);
        }
        row("random", &self.random);
        row("random expected", &self.random_expected);
        if let Some(r) = self.aou_reduction {
            writeln!(s, "AoU reduction vs baseline: {r:.1}%").unwrap();
        }
        writeln!(s, "AoU reduction vs random: {:.1}%", self.aou_reduction_vs_random).unwrap();
        s
    }
}

/// Positions reported by a run, as written to `estimates.jsonl`.
pub fn reported_positions(estimates: &[EstimateRecord]) -> Vec<(f64, Point)> {
    estimates.iter().filter_map(|e| e.reported().map(|p| (e.t, p))).collect()
}

pub fn cmd_evaluate(
    config: &Config,
    estimates: &[EstimateRecord],
    truth: &[TruthRecord],
    baseline: Option<&[EstimateRecord]>,
) -> Result<Report> {
    let room = &config.deployment.room;
    let reported = reported_positions(estimates);
    let method = evaluate(&reported, truth, room)?;
    let truth_positions: Vec<Point> = align(&reported, truth)?.into_iter().map(|(_, q)| q).collect();
    let random = random_baseline(&truth_positions, room, config.seed)?;
    let random_expected = random_baseline_expected(&truth_positions, room)?;
    let baseline = baseline.map(|b| evaluate(&reported_positions(b), truth, room)).transpose()?;
    Ok(Report {
        aou_reduction: baseline.as_ref().map(|b| aou_reduction(b, &method)),
        aou_reduction_vs_random: aou_reduction(&random, &method),
        method,
        random,
        random_expected,
        baseline,
    })
}

/// File-based form of [`cmd_evaluate`].
pub fn evaluate_files(config: &Config, estimates: &Path, truth: &Path, baseline: Option<&Path>) -> Result<Report> {
    let est: Vec<EstimateRecord> = trace::read_jsonl(estimates)?;
    let truth = trace::read_truth(truth)?;
    let base: Option<Vec<EstimateRecord>> = baseline.map(trace::read_jsonl).transpose()?;
    cmd_evaluate(config, &est, &truth, base.as_deref())
}

/// The six RTI/UWB combinations with product fusion.
pub fn default_sweep_variants() -> Vec<Methods> {
    let mut v = Vec::new();
    for rti in [RtiMethod::Ab, RtiMethod::Vb] {
        for uwb in [UwbMethod::None, UwbMethod::Hmm, UwbMethod::Vb] {
            v.push(Methods { rti, uwb, fusion: FusionMethod::Product });
        }
    }
    v
}

/// Mean metrics of one method at one subset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sensors_per_side: usize,
    pub method: String,
    pub sims: usize,
    pub rms_l2: f64,
    pub rms_x: f64,
    pub rms_y: f64,
    pub aou: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Random subsets of `s` nodes from each deployment side, `n_sims` of them,
/// or the single possible subset when there is only one.
pub fn sweep_subsets(config: &Config, s: usize, n_sims: usize) -> Result<Vec<Vec<usize>>> {
    let sides = config.deployment.sides();
    if s == 0 {
        return Err(Error::Config("subset size must be at least 1".into()));
    }
    for side in &sides {
        if s > side.len() {
            return Err(Error::Config(format!("subset size {s} exceeds the {} sensors on one side", side.len())));
        }
    }
    let unique = sides.iter().map(|side| binomial(side.len(), s)).product::<u128>();
    let sims = if unique == 1 { 1 } else { n_sims };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(s as u64);
    Ok((0..sims)
        .map(|_| {
            let mut nodes: Vec<usize> =
                sides.iter().flat_map(|side| sample(&mut rng, side.len(), s).into_iter().map(|i| side[i])).collect();
            nodes.sort_unstable();
            nodes
        })
        .collect())
}

/// Runs every variant on the same random sensor subsets for each size.
pub fn cmd_sweep(
    config: &Config,
    rss: &[RssSample],
    cir: &[CirFrame],
    truth: &[TruthRecord],
    sizes: &[usize],
    n_sims: usize,
    variants: &[Methods],
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if n_sims == 0 {
        return Err(Error::Config("need at least one simulation per subset size".into()));
    }
    let subsets: Vec<(usize, Vec<Vec<usize>>)> =
        sizes.iter().map(|&s| sweep_subsets(config, s, n_sims).map(|v| (s, v))).collect::<Result<_>>()?;
    let grid = crate::geometry::VoxelGrid::new(&config.deployment.room, config.rti.voxel_width)?;
    let prior = Arc::new(PriorPrecision::new(&grid, &config.rti)?);
    let room = &config.deployment.room;
    let mut rows = Vec::new();
    for (s, sims) in subsets {
        let mut sums = vec![[0.0; 4]; variants.len()];
        for (i, nodes) in sims.iter().enumerate() {
            let model = Model::with_prior(config, Some(nodes), Arc::clone(&prior))?;
            for (v, m) in variants.iter().enumerate() {
                let cfg = Config { methods: *m, ..config.clone() };
                let out = run(&model, &cfg, rss, cir)?;
                let metrics = evaluate(&out.reported_positions(), truth, room)?;
                let acc = &mut sums[v];
                acc[0] += metrics.rms_l2;
                acc[1] += metrics.rms_x;
                acc[2] += metrics.rms_y;
                acc[3] += metrics.aou;
            }
            info!("sweep S={s}: subset {}/{} {nodes:?}", i + 1, sims.len());
        }
        let n = sims.len() as f64;
        for (m, acc) in variants.iter().zip(&sums) {
            rows.push(SweepRow {
                sensors_per_side: s,
                method: m.label(),
                sims: sims.len(),
                rms_l2: acc[0] / n,
                rms_x: acc[1] / n,
                rms_y: acc[2] / n,
                aou: acc[3] / n,
            });
        }
    }
    Ok(rows)
}
