use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent system or scenario description (dangling bus, bad assignment, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A physical or control parameter is out of its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Caller violated an operation precondition (empty channel, window outside horizon, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Integration(#[from] IntegrationError),

    /// The pre-event settling phase ended away from steady state.
    #[error("initialization did not settle: {0}")]
    Settle(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Raised when a right-hand-side evaluation produced a non-finite derivative.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("non-finite derivative at t = {t} s in `{device}.{slice}` (state index {index})")]
pub struct IntegrationError {
    pub t: f64,
    pub device: String,
    pub slice: String,
    pub index: usize,
}
