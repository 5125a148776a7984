use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The observed-to-observed coefficient matrix contains a directed cycle.
    #[error("coefficient matrix is cyclic")]
    Cyclic,
    /// A model violates one of its structural invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A column has zero variance and cannot be standardized.
    #[error("column {column} is constant")]
    ConstantColumn { column: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    /// The binary target contains only one class.
    #[error("target contains a single class")]
    SingleClass,
    #[error("model generation failed: {0}")]
    Generation(String),
    /// A brute-force routine was asked for more variables than it supports.
    #[error("{what} supports at most {max} variables, got {got}")]
    TooLarge {
        what: &'static str,
        max: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
