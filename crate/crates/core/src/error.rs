use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the reduced-order pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 3 nodes per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point ({x}, {y}) lies outside the domain [0, pi]^2")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("detector at ({x}, {y}) does not coincide with a grid node")]
    DetectorOffGrid { x: f64, y: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("snapshot set carries no energy (all snapshots vanish)")]
    ZeroSnapshots,

    #[error("step size {step:e} violates the stability bound beta < {bound:e}")]
    StepTooLarge { step: f64, bound: f64 },

    #[error("normal matrix is singular (lambda = 0 and S_pod rank deficient)")]
    SingularNormalMatrix,

    #[error("unknown shape `{name}`; available: {available}")]
    UnknownShape { name: String, available: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Tags an error with the experiment stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
