//! Error type shared by all modules.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A time horizon was exceeded; the message says how to extend it.
    #[error("horizon exceeded: {0}")]
    Horizon(String),

    /// A solution left the admissible region.
    #[error("solution diverged at t = {t}: |x| = {norm:e} exceeds {threshold:e}")]
    Diverged { t: f64, norm: f64, threshold: f64 },

    /// A requested variant is not supported by this operation.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn horizon(msg: impl Into<String>) -> Self {
        Error::Horizon(msg.into())
    }
}
