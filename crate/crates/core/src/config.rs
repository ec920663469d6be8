//! Run configuration: deployment, model parameters and method selection.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::geometry::Deployment;
use crate::rti::RtiParams;
use crate::sim;
use crate::tracking::TrackerParams;
use crate::uwb::{HmmParams, UwbParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RtiMethod {
    /// Attenuation relative to an empty-room calibration.
    Ab,
    /// Short-term RSS variance, no calibration.
    Vb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UwbMethod {
    Hmm,
    Vb,
    None,
}

impl RtiMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RtiMethod::Ab => "ab",
            RtiMethod::Vb => "vb",
        }
    }
}

impl UwbMethod {
    pub fn name(&self) -> &'static str {
        match self {
            UwbMethod::Hmm => "hmm",
            UwbMethod::Vb => "vb",
            UwbMethod::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Methods {
    pub rti: RtiMethod,
    pub uwb: UwbMethod,
    pub fusion: FusionMethod,
}

impl Default for Methods {
    fn default() -> Self {
        Self { rti: RtiMethod::Ab, uwb: UwbMethod::Hmm, fusion: FusionMethod::Product }
    }
}

impl Methods {
    /// Short label such as `ab+hmm/product`.
    pub fn label(&self) -> String {
        match self.uwb {
            UwbMethod::None => format!("{}-rti", self.rti.name()),
            u => format!("{}-rti+{}-uwb/{}", self.rti.name(), u.name(), self.fusion.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub deployment: Deployment,
    pub rti: RtiParams,
    pub uwb: UwbParams,
    pub hmm: HmmParams,
    pub tracker: TrackerParams,
    /// Empty-area threshold `T_e` on image maxima.
    pub empty_area_threshold: f64,
    pub methods: Methods,
    pub seed: u64,
    /// Length of the empty-room prefix at the start of the traces.
    pub calibration_seconds: f64,
    /// Compare each CIR window against this many frames just before it
    /// instead of the fixed calibration prefix. 0 keeps the fixed prefix.
    pub sliding_calibration_frames: usize,
    /// Baum-Welch passes over the session's observation vectors before decoding.
    pub baum_welch_iterations: usize,
    /// Intensity above which a variance-based UWB bin counts as changed.
    pub vb_change_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        let scenario = sim::study_room(0);
        Self {
            deployment: scenario.deployment,
            rti: RtiParams::default(),
            uwb: UwbParams::default(),
            hmm: HmmParams::default(),
            tracker: TrackerParams::default(),
            empty_area_threshold: 0.05,
            methods: Methods::default(),
            seed: 0,
            calibration_seconds: scenario.calibration_seconds,
            sliding_calibration_frames: 0,
            baum_welch_iterations: 0,
            vb_change_threshold: 0.1,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        self.rti.validate()?;
        self.uwb.validate()?;
        self.hmm.validate()?;
        self.tracker.validate()?;
        if !(self.empty_area_threshold >= 0.0) {
            return Err(Error::Config("empty_area_threshold must be non-negative".into()));
        }
        if !(self.calibration_seconds >= 0.0) {
            return Err(Error::Config("calibration_seconds must be non-negative".into()));
        }
        if self.sliding_calibration_frames == 1 {
            return Err(Error::Config("sliding calibration needs at least 2 frames".into()));
        }
        if !(self.vb_change_threshold > 0.0) {
            return Err(Error::Config("vb_change_threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_tables() {
        let c = Config::default();
        assert_eq!(c.rti, RtiParams::default());
        assert_eq!(c.rti.voxel_width, 0.15);
        assert_eq!(c.tracker.h_app, 8);
        assert_eq!(c.tracker.window, 15);
        assert_eq!(c.tracker.gate_radius, 1.2);
        assert_eq!(c.empty_area_threshold, 0.05);
        assert_eq!(c.uwb.n_u, 5);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.methods = Methods { rti: RtiMethod::Vb, uwb: UwbMethod::Vb, fusion: FusionMethod::XFromY };
        c.uwb.los_bin = Some(5);
        c.seed = 42;
        let back = Config::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c =
            Config::from_json(r#"{"methods": {"rti": "vb", "uwb": "none", "fusion": "joint"}, "seed": 3}"#).unwrap();
        assert_eq!(c.methods.uwb, UwbMethod::None);
        assert_eq!(c.methods.fusion, FusionMethod::Joint);
        assert_eq!(c.rti, RtiParams::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"sed": 1}"#,
            r#"{"rti": {"lambda": 0.1}}"#,
            r#"{"methods": {"rti": "xx", "uwb": "vb", "fusion": "joint"}}"#,
        ] {
            let err = Config::from_json(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn labels() {
        assert_eq!(Methods::default().label(), "ab-rti+hmm-uwb/product");
        let m = Methods { rti: RtiMethod::Vb, uwb: UwbMethod::None, fusion: FusionMethod::Product };
        assert_eq!(m.label(), "vb-rti");
    }
}
