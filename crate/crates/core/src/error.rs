use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("truncation mismatch: {0} vs {1}")]
    TruncationMismatch(usize, usize),

    #[error("permutation arity {perm} does not match tensor level {level}")]
    ArityMismatch { perm: usize, level: usize },

    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("level {level} has {got} coefficients, expected {expected}")]
    BadLevelLength {
        level: usize,
        got: usize,
        expected: usize,
    },

    #[error("non-finite coefficient at level {0}")]
    NonFinite(usize),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("interval [{s}, {t}] outside path domain [{t0}, {t1}]")]
    IntervalOutOfDomain { s: f64, t: f64, t0: f64, t1: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Lorentz invariant drift {0:e} exceeds guard")]
    LorentzDrift(f64),

    #[error("point is not on the hyperboloid (-x*y = {0})")]
    OffHyperboloid(f64),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
