use thiserror::Error;

/// Errors raised by the selection, stopping, aggregation and file layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty matrix: rows and columns must both be at least 1")]
    EmptyMatrix,

    #[error("dimension mismatch: visual dim {visual} vs text dim {text}")]
    DimensionMismatch { visual: usize, text: usize },

    #[error("infeasible budget: requested {requested} of {available}")]
    InfeasibleBudget { requested: usize, available: usize },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("kernel restriction is numerically indefinite (pivot {pivot:e} at position {position})")]
    Indefinite { position: usize, pivot: f64 },

    #[error("token {index} has zero relevance; decomposition undefined without jitter")]
    ZeroRelevance { index: usize },

    #[error("invalid answer distribution: {0}")]
    InvalidDistribution(String),

    #[error("model adapter failed: {0}")]
    Adapter(#[source] Box<dyn std::error::Error + Send + Sync>),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line tool.
    ///
    /// 0 ok, 1 other failure, 2 parse, 3 shape, 4 infeasible, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Malformed(_) | Error::NonFinite { .. } | Error::EmptyMatrix | Error::Io { .. } => 2,
            Error::InvalidDistribution(_) => 2,
            Error::DimensionMismatch { .. } => 3,
            Error::InfeasibleBudget { .. }
            | Error::InvalidSubset(_)
            | Error::InvalidParameter(_)
            | Error::TooLarge(_) => 4,
            Error::Indefinite { .. } | Error::ZeroRelevance { .. } => 5,
            Error::Adapter(_) => 1,
        }
    }
}
