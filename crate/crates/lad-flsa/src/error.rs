use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("partition covers {partition_n} points, expected {expected}")]
    CoverageMismatch { partition_n: usize, expected: usize },

    #[error("oracle size cap: n = {n} exceeds {max}")]
    OracleSizeCap { n: usize, max: usize },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("GCV undefined at saturation (df = n)")]
    GcvUndefined,

    #[error("empty tuning grid")]
    EmptyGrid,

    #[error("zero variance: cannot standardize a constant signal")]
    ZeroVariance,

    #[error("LARE undefined for zero truth")]
    LareUndefined,

    #[error("signal too short: {0}")]
    SignalTooShort(String),

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
