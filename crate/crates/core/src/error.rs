use thiserror::Error;

/// Errors raised by chain construction and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("entry ({row}, {col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("chain is reducible")]
    Reducible,

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("distribution is not invariant under the chain (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("state {index} out of range for {n} states")]
    InvalidState { index: usize, n: usize },

    #[error("states must be distinct")]
    RepeatedState,

    #[error("epsilon {epsilon} outside feasible range [0, {max}]")]
    EpsilonOutOfRange { epsilon: f64, max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("preconditions failed: {0}")]
    Preconditions(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, ChainError>;
