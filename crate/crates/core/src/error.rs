use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the CLI exit code they map to: configuration
/// problems, data problems, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid range: lo={lo} must be < hi={hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("unknown mode: {0}")]
    Mode(String),

    #[error("degenerate batch: training-mode batch norm needs batch >= 2, got {0}")]
    DegenerateBatch(usize),

    #[error("numerics error: {0}")]
    Numerics(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("empty range: {0}")]
    EmptyRange(String),

    #[error("rank error: {0}")]
    Rank(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidParam(_) | Error::Mode(_) => 2,
            Error::Numerics(_) | Error::Rank(_) => 4,
            _ => 3,
        }
    }
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
