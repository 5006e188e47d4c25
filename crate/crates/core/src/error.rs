use alloc::string::String;

/// Errors raised by the learning and feature-extraction pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter violates an operation precondition.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data has the wrong shape or content.
    #[error("input error: {0}")]
    Input(String),
    /// A least-squares system lost full column rank.
    #[error("singular system: column {column} is numerically dependent (pivot {pivot:e})")]
    Singular { column: usize, pivot: f64 },
    /// Learning input carries no signal (e.g. all patches are zero after mean removal).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}

macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(alloc::format!($($arg)*)) };
}

pub(crate) use config_err;
pub(crate) use input_err;
