use thiserror::Error;

/// Errors raised by the copula-equality toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} lies outside the unit interval [0, 1]")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {column} contains tied values")]
    TiesPresent { column: usize },

    #[error("paired mode requires equal sample sizes, got {0:?}")]
    UnequalSizes(Vec<usize>),

    #[error("variance estimate is zero while the statistic is {statistic}")]
    DegenerateVariance { statistic: f64 },

    #[error("pair ({ell}, {m}) is not ordered within 1..={k}")]
    PairOrder { ell: usize, m: usize, k: usize },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numeric degeneracy rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::DegenerateVariance { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
