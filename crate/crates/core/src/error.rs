use thiserror::Error;

/// Errors raised by the market engine and its analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScpmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("allocation is outside the utility domain")]
    OutOfDomain,

    #[error("not a probability vector: {0}")]
    NotOnSimplex(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cost minimization has no solution: {0}")]
    Unsolvable(String),

    #[error("price vector sums to {0}, beyond solver tolerance")]
    SimplexViolation(f64),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("bundle must be nonnegative and nonzero")]
    DegenerateBundle,

    #[error("order fills without bound: the bundle price never exceeds the limit price {0}")]
    UnboundedFill(f64),

    #[error("fill was computed against a different market state")]
    StaleFill,

    #[error("outcome {index} out of range for {n} outcomes")]
    InvalidOutcome { index: usize, n: usize },

    #[error("utility is not non-decreasing: {0}")]
    NonMonotoneUtility(String),

    #[error("order file line {line}: {message}")]
    OrderFile { line: u64, message: String },

    #[error("empty bracket [{lo}, {hi}]")]
    EmptyBracket { lo: f64, hi: f64 },

    #[error("finite difference step shrank below the minimum near a domain boundary")]
    FiniteDifference,

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = ScpmError> = std::result::Result<T, E>;

impl From<std::io::Error> for ScpmError {
    fn from(e: std::io::Error) -> Self {
        ScpmError::Io(e.to_string())
    }
}
