use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: operator built for n={}, h={}, field has n={}, h={}", expected.0, expected.1, found.0, found.1)]
    GridMismatch { expected: (usize, f64), found: (usize, f64) },

    #[error("{stage} solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("entropy audit failed: excess {excess:.3e} above slack {slack:.3e}")]
    EntropyViolation { excess: f64, slack: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("zero mass")]
    ZeroMass,

    #[error("double-sum dissipation limited to n <= {cap}, got n = {n}")]
    GridTooLarge { n: usize, cap: usize },

    #[error("cube side {side} is smaller than two grid spacings ({min})")]
    CubeTooSmall { side: f64, min: f64 },

    #[error("u^s overflows at iteration {failed_n}; largest valid n is {largest_valid_n:?}")]
    ExponentOverflow { failed_n: usize, largest_valid_n: Option<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("corrupt snapshot {path}: {reason}")]
    CorruptSnapshot { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
