use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gamma sampler produced nonfinite draws twice in a row")]
    SamplerFailure,

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("stopping rule exceeded truncation cap {cap}")]
    TruncationCapExceeded { cap: usize },

    #[error("empty concentration grid")]
    EmptyGrid,

    #[error("operation requires a scalar-output network, got output dim {0}")]
    NonScalarOutput(usize),

    #[error("nonfinite gradient at parameter index {index}")]
    NonFiniteGradient { index: usize },

    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("training diverged at epoch {epoch}")]
    DivergedTraining { epoch: usize },

    #[error("noise scale must be positive, got {0}")]
    InvalidVariance(f64),

    #[error("invalid pmf table: {0}")]
    InvalidPmf(String),

    #[error("matrix product is numerically degenerate: {0}")]
    NumericalDegeneracy(String),

    #[error("summary window {window} invalid for trace of length {len}")]
    InvalidWindow { window: usize, len: usize },

    #[error("checkpoint blob is malformed: {0}")]
    MalformedBlob(String),
}

pub type Result<T> = std::result::Result<T, Error>;
