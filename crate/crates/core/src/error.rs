use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// A record that parsed but violates a data invariant.
    #[error("validation error ({location}): {message}")]
    Validation { location: String, message: String },

    #[error("frame format error: {0}")]
    Format(String),

    #[error("missing frame indices {missing:?} in {path}")]
    MissingFrames { path: PathBuf, missing: Vec<usize> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown reference(s): {0:?}")]
    DanglingReference(Vec<String>),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    /// Non-finite loss or activations during training.
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True when the error was caused by the caller's input rather than an
    /// internal failure. Command-line front ends map this to exit code 2.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Format(_)
            | Error::MissingFrames { .. }
            | Error::Config(_)
            | Error::DanglingReference(_)
            | Error::Domain(_) => true,
            Error::Contract(_) | Error::DegenerateBatch(_) | Error::Diverged(_) => false,
        }
    }
}
