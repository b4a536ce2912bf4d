use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum ClaError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    Convergence { iterations: usize, context: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported version {found:#04x} (expected {expected:#04x})")]
    UnsupportedVersion { found: u8, expected: u8 },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ClaError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ClaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ClaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>, source: ClaError) -> Self {
        ClaError::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    /// True for errors caused by files: missing, unreadable, or malformed.
    pub fn is_io_or_format(&self) -> bool {
        match self {
            ClaError::Format(_)
            | ClaError::Parse { .. }
            | ClaError::UnsupportedVersion { .. }
            | ClaError::Io { .. } => true,
            ClaError::InFile { source, .. } => source.is_io_or_format(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClaError>;
