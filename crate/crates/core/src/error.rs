use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EgfError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("hypothesis violated: {what} (residual {residual:e} > tolerance {tolerance:e})")]
    HypothesisViolation {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("decay rate undefined: {0}")]
    UndefinedRate(String),
}

pub type Result<T> = std::result::Result<T, EgfError>;

pub(crate) fn input<S: Into<String>>(msg: S) -> EgfError {
    EgfError::Input(msg.into())
}
