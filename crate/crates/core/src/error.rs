use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("calibration is missing {} (link, channel) pairs, first: {:?}", .0.len(), .0.first())]
    CalibrationGaps(Vec<(usize, u8)>),

    #[error("{method} requires a calibration segment but the trace has none")]
    MissingCalibration { method: &'static str },

    #[error("matrix is not positive definite: {0}")]
    Singular(&'static str),

    #[error("degenerate observations: all state likelihoods vanish at bin {0}")]
    DegenerateObservation(usize),

    #[error("invalid model parameters: {0}")]
    Params(String),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for bad or missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Params(_) | Error::Geometry(_) => 2,
            _ => 3,
        }
    }
}
