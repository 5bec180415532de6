use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ensemble size must be odd for majority voting, got k={0}")]
    EvenEnsemble(u32),

    #[error("degenerate mixture: both component densities vanish at p={p}")]
    DegenerateDensities { p: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("embeddings coincide; inverse distance is unbounded")]
    ZeroDistance,

    #[error("transfer weights are all zero")]
    ZeroWeights,

    #[error("not enough samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
