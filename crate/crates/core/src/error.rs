use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid phantom spec field `{field}`: {message}")]
    Spec { field: String, message: String },
    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("score field has no nonzero scores inside the finger mask")]
    EmptyMap,
    #[error("no vessel run found in the central band")]
    NoVessel,
    #[error("tracking failure: {gapped} of {total} frames have no matched vessel")]
    TrackingFailure { gapped: usize, total: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code: 2 for input or configuration problems, 3 for
    /// failures inside the pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyMap | Error::NoVessel | Error::TrackingFailure { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
