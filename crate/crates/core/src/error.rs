use thiserror::Error;

/// Errors raised by the model, the fluctuation identities and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("root bracketing failed in {context}: {reason}")]
    Bracket { context: &'static str, reason: String },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("loss of precision: {reason}; try t >= {min_t:.3e}")]
    Precision { reason: String, min_t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
