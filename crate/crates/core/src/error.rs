use thiserror::Error;

/// Errors raised by the solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A model lacks a capability the requested estimator needs.
    #[error("missing capability: {0}")]
    Capability(String),

    /// A solver configuration is unusable (CFL, probability bound, ...).
    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// A recorded tape contains a record the sampler could never produce.
    #[error("tape corruption: {0}")]
    TapeCorruption(String),

    /// An object is not in the state the operation requires.
    #[error("invalid state: {0}")]
    State(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
