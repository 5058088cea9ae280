use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid event: {message}")]
    InvalidEvent { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("metric `{metric}` is undefined in every bin")]
    MetricUndefined { metric: String },

    #[error("metric set mismatch: {0}")]
    MetricMismatch(String),

    #[error("embedding provider failed on bin {bin}: {message}")]
    Provider { bin: usize, message: String },

    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    InFile {
        path: String,
        line: Option<usize>,
        message: String,
        input: bool,
    },

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Attaches the file the error arose from; parse positions become
    /// `path:line`.
    pub fn in_file(self, path: impl AsRef<std::path::Path>) -> Self {
        let path = path.as_ref().display().to_string();
        let input = self.is_input_error();
        match self {
            Error::Parse { line, message } => Error::InFile {
                path,
                line: Some(line),
                message,
                input,
            },
            Error::InvalidEvent { line, message } => Error::InFile {
                path,
                line: Some(line),
                message: format!("invalid event: {message}"),
                input,
            },
            Error::InFile { .. } => self,
            other => Error::InFile {
                path,
                line: None,
                message: other.to_string(),
                input,
            },
        }
    }

    /// True when the failure is caused by the caller's input rather than the
    /// environment (maps onto exit code 2 in the CLI).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InFile { input, .. } => *input,
            Error::Io(e) => e.kind() == io::ErrorKind::NotFound,
            Error::Provider { .. } => false,
            _ => true,
        }
    }
}
