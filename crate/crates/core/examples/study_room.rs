//! Runs the main method combinations on simulated study-room walks and prints
//! error metrics next to the random baseline.
//!
//! cargo run --release -p rf-fusion-core --example study_room -- [seeds]

use rf_fusion::config::{Config, Methods, RtiMethod, UwbMethod};
use rf_fusion::eval::{aou_reduction, evaluate, random_baseline_expected};
use rf_fusion::fusion::FusionMethod;
use rf_fusion::pipeline::{run, Model};
use rf_fusion::sim::{generate_cir_stream, generate_rss_stream, study_room, GroundTruth};

fn main() -> rf_fusion::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = study_room(0);
    let mut cfg = Config {
        deployment: base.deployment.clone(),
        calibration_seconds: base.calibration_seconds,
        ..Config::default()
    };
    let model = Model::new(&cfg, None)?;
    let combos = [
        Methods { rti: RtiMethod::Ab, uwb: UwbMethod::None, fusion: FusionMethod::Product },
        Methods { rti: RtiMethod::Ab, uwb: UwbMethod::Hmm, fusion: FusionMethod::Product },
        Methods { rti: RtiMethod::Vb, uwb: UwbMethod::None, fusion: FusionMethod::Product },
        Methods { rti: RtiMethod::Vb, uwb: UwbMethod::Vb, fusion: FusionMethod::Product },
        Methods { rti: RtiMethod::Ab, uwb: UwbMethod::Hmm, fusion: FusionMethod::Joint },
        Methods { rti: RtiMethod::Ab, uwb: UwbMethod::Hmm, fusion: FusionMethod::XFromY },
    ];
    for seed in 0..seeds {
        let s = study_room(seed);
        let rss = generate_rss_stream(&s)?;
        let cir = generate_cir_stream(&s)?;
        let truth = GroundTruth::of(&s);
        let positions: Vec<_> = truth.records.iter().filter_map(|r| r.position).collect();
        let random = random_baseline_expected(&positions, &s.deployment.room)?;
        println!("seed {seed}: random rms x {:.2} y {:.2} l2 {:.2}", random.rms_x, random.rms_y, random.rms_l2);
        let mut rti_only = None;
        for m in combos {
            cfg.methods = m;
            let out = run(&model, &cfg, &rss, &cir)?;
            let metrics = evaluate(&out.reported_positions(), &truth.records, &s.deployment.room)?;
            let (mut hit, mut total) = (0, 0);
            for f in &out.uwb {
                if let Some(k) = truth.nearest(f.t).and_then(|r| r.k_star) {
                    total += 1;
                    hit += usize::from(f.k_hat.is_some_and(|h| h.abs_diff(k) <= 1));
                }
            }
            if m.uwb == UwbMethod::None && m.rti == RtiMethod::Ab {
                rti_only = Some(metrics);
            }
            let red = rti_only.map(|b| aou_reduction(&b, &metrics)).unwrap_or(0.0);
            println!(
                "  {:28} n {:4} x {:.2} y {:.2} l2 {:.2} aou-red {:5.1}% k* {}/{}",
                m.label(),
                metrics.frames,
                metrics.rms_x,
                metrics.rms_y,
                metrics.rms_l2,
                red,
                hit,
                total
            );
        }
    }
    Ok(())
}
