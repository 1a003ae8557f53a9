use thiserror::Error;

/// Errors raised by estimator construction, fitting and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("basis construction failed: {0}")]
    BasisConstruction(String),

    #[error("local fit failed on cell {cell}: {reason}")]
    Fit { cell: String, reason: String },

    #[error("delta = {delta} is not above the validity floor {floor}")]
    BelowValidityFloor { delta: f64, floor: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
