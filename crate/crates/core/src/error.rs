//! Error types shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum DistillError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DistillError>;

impl DistillError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        DistillError::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        DistillError::Numeric(msg.into())
    }
}
