use thiserror::Error;

/// Errors raised by grid construction, transforms, norms and the decomposition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("expected a {expected} domain function, got {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The test function does not decay at the box boundary, so torus wraparound
    /// would corrupt the result.
    #[error("boundary-decay guard failed: boundary max {boundary:e} vs sup {sup:e}")]
    BoundaryDecay { boundary: f64, sup: f64 },

    /// Energy beyond the resolved dyadic range is too large for a truncated sum.
    #[error("under-resolved input: tail {tail:e} exceeds {limit:e}")]
    UnderResolved { tail: f64, limit: f64 },

    #[error("capability limit: {0}")]
    CapabilityLimit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested parameters do not satisfy the hypothesis of the inequality
    /// being checked.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
