use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rf_fusion::commands::{cmd_simulate, cmd_sweep, cmd_track, default_sweep_variants, evaluate_files};
use rf_fusion::config::{Config, Methods, RtiMethod, UwbMethod};
use rf_fusion::fusion::FusionMethod;
use rf_fusion::sim::{motel, study_room, MotelUwb, Scenario};
use rf_fusion::{trace, Error, Result};

#[derive(Parser)]
#[command(name = "rf-fusion", version, about = "Device-free localization from RSS tomography and UWB ranging")]
struct Cli {
    /// JSON config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config and of the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    rti: Option<RtiArg>,
    #[arg(long, global = true, value_enum)]
    uwb: Option<UwbArg>,
    #[arg(long, global = true, value_enum)]
    fusion: Option<FusionArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RtiArg {
    Ab,
    Vb,
}

#[derive(Clone, Copy, ValueEnum)]
enum UwbArg {
    Hmm,
    Vb,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Product,
    Joint,
    Xfromy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    StudyRoom,
    MotelA,
    MotelB,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic RSS and CIR traces with ground truth.
    Simulate {
        /// Scenario JSON file.
        #[arg(long, conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "study-room")]
        preset: Preset,
        /// Overrides the empty-room prefix length.
        #[arg(long)]
        calibration_seconds: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize and track from a trace directory.
    Track {
        /// Directory holding rss.jsonl and cir.jsonl.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimates against ground truth.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Estimates of the run to compute the AoU reduction against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Report JSON file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean errors over random sensor subsets of each size.
    Sweep {
        #[arg(long)]
        traces: PathBuf,
        /// Sensors per side.
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5, 6, 7, 8, 9, 10])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        sims: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    fn method_overridden(&self) -> bool {
        self.rti.is_some() || self.uwb.is_some() || self.fusion.is_some()
    }

    fn apply(&self, config: &mut Config) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        let m = &mut config.methods;
        if let Some(r) = self.rti {
            m.rti = match r {
                RtiArg::Ab => RtiMethod::Ab,
                RtiArg::Vb => RtiMethod::Vb,
            };
        }
        if let Some(u) = self.uwb {
            m.uwb = match u {
                UwbArg::Hmm => UwbMethod::Hmm,
                UwbArg::Vb => UwbMethod::Vb,
                UwbArg::None => UwbMethod::None,
            };
        }
        if let Some(f) = self.fusion {
            m.fusion = match f {
                FusionArg::Product => FusionMethod::Product,
                FusionArg::Joint => FusionMethod::Joint,
                FusionArg::Xfromy => FusionMethod::XFromY,
            };
        }
    }
}

fn load_config(cli: &Cli, fallback: Option<&Path>) -> Result<Config> {
    let mut config = match cli.config.as_deref().or(fallback.filter(|p| p.exists())) {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cli.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { scenario, preset, calibration_seconds, out } => {
            let config = load_config(cli, None)?;
            let seed = cli.seed.unwrap_or(config.seed);
            let mut s: Scenario = match scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    let mut s: Scenario =
                        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    if let Some(seed) = cli.seed {
                        s.seed = seed;
                    }
                    s
                }
                None => match preset {
                    Preset::StudyRoom => study_room(seed),
                    Preset::MotelA => motel(seed, MotelUwb::A),
                    Preset::MotelB => motel(seed, MotelUwb::B),
                },
            };
            if let Some(c) = calibration_seconds {
                s.calibration_seconds = *c;
            }
            let summary = cmd_simulate(&config, &s, out)?;
            eprintln!(
                "wrote {} RSS records, {} CIR frames, {} truth rows to {}",
                summary.rss_records,
                summary.cir_records,
                summary.truth_records,
                out.display()
            );
        }
        Command::Track { traces, out } => {
            let config = load_config(cli, Some(&traces.join(trace::CONFIG_FILE)))?;
            let result = cmd_track(&config, traces, out)?;
            eprintln!(
                "{}: {} estimates, track confirmed: {}",
                config.methods.label(),
                result.estimates.len(),
                result.confirmed_any()
            );
        }
        Command::Evaluate { estimates, truth, baseline, out } => {
            let fallback = truth.parent().map(|d| d.join(trace::CONFIG_FILE));
            let config = load_config(cli, fallback.as_deref())?;
            let report = evaluate_files(&config, estimates, truth, baseline.as_deref())?;
            eprint!("{}", report.table());
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Data(e.to_string()))?;
            write_output(out.as_deref(), &json)?;
        }
        Command::Sweep { traces, sizes, sims, out } => {
            let config = load_config(cli, Some(&traces.join(trace::CONFIG_FILE)))?;
            let (rss, cir) = trace::read_traces(traces)?;
            let truth = trace::read_truth(&traces.join(trace::TRUTH_FILE))?;
            let variants = if cli.method_overridden() {
                let rti_only = Methods { uwb: UwbMethod::None, ..config.methods };
                if config.methods.uwb == UwbMethod::None {
                    vec![rti_only]
                } else {
                    vec![rti_only, config.methods]
                }
            } else {
                default_sweep_variants()
            };
            let rows = cmd_sweep(&config, &rss, &cir, &truth, sizes, *sims, &variants)?;
            for r in &rows {
                eprintln!(
                    "S={:<3} {:<28} sims {:<3} rms_l2 {:.3} rms_x {:.3} rms_y {:.3}",
                    r.sensors_per_side, r.method, r.sims, r.rms_l2, r.rms_x, r.rms_y
                );
            }
            let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::Data(e.to_string()))?;
            write_output(out.as_deref(), &json)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RF_FUSION_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
