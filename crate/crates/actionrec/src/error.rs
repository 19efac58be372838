use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// I/O failure, annotated with the path that was being accessed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file's contents do not match the expected format.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Dimension or layout mismatch between inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument is outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested computation exceeds a stated capacity bound.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Not enough data to run the requested estimation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Training data is degenerate (e.g. a single class).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A manifest or generator input failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A pipeline stage is not configured or its artifact is missing.
    #[error("configuration error ({stage}): {reason}")]
    Config { stage: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
