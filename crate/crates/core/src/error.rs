use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("row {row}: only {found} of {wanted} neighbors remain after exclusion masking")]
    InsufficientCandidates { row: usize, found: usize, wanted: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gradients were not reset before a second backward pass")]
    GradNotReset,

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI: 2 for data/format problems, 3 for
    /// numerical failures, 1 for everything that is a usage mistake.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
