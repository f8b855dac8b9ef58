use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {dims} (supported: 1..={max})")]
    UnsupportedDimension { dims: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate collocation points at indices {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },

    #[error("dense Gram assembly requested for {n} points, cap is {cap}; use the matrix-free path")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("dense Gram matrix not materialized")]
    DenseUnavailable,

    #[error("index {index} out of range for system of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty system: at least one collocation point is required")]
    EmptySystem,

    #[error("ill-conditioned system: Cholesky pivot {pivot} is not positive ({value:e})")]
    IllConditioned { pivot: usize, value: f64 },

    #[error("stochastic dual descent diverged (|alpha| > 1e12) after {halvings} step-size halvings; reduce the step size")]
    StepSizeTooLarge { halvings: usize },

    #[error("posterior factorization unavailable; use Monte Carlo variance mode")]
    FactorizationUnavailable,

    #[error("relative MSE undefined: ground truth is identically zero")]
    UndefinedMetric,

    #[error("candidate pool exhausted")]
    PoolExhausted,
}
