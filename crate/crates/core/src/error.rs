use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A log line that does not match the `[HH:MM] <speaker> text` grammar.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An annotation or config line with the wrong shape.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    /// Cross-file consistency problems, e.g. an annotation pointing past the end of its log.
    #[error("integrity: {0}")]
    Integrity(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite loss or values during training.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the input data rather than the model.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Format { .. }
                | Error::Integrity(_)
                | Error::File { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Checkpoint(_)
                | Error::Config(_)
        )
    }
}
