use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by model validation, numerics and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("revision grid mismatch: {0}")]
    GridMismatch(String),

    #[error("corrector {theorem} does not apply to the {strategy} strategy")]
    TheoremMismatch {
        theorem: &'static str,
        strategy: &'static str,
    },

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error estimate {error_estimate:e} after {intervals} subintervals"
    )]
    Quadrature {
        estimate: f64,
        error_estimate: f64,
        intervals: usize,
    },

    #[error("non-finite state at t={time} (path {path})")]
    NonFinite { path: u64, time: f64 },

    #[error("epsilon {epsilon} is below the sample resolution 1/{samples}")]
    Resolution { epsilon: f64, samples: usize },

    #[error(
        "no enlargement up to rho={rho_max} super-hedges: worst sample x={x}, y={y} has corrector {corrector}"
    )]
    NoSuperhedge {
        rho_max: f64,
        x: f64,
        y: f64,
        corrector: f64,
    },

    #[error("slope fit needs at least {needed} usable points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
