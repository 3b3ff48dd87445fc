use std::path::PathBuf;

/// Errors produced by the quality-control pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read input directory {path}: {reason}")]
    UnreadableRoot { path: PathBuf, reason: String },

    #[error("malformed {format} file {path}: {reason}")]
    Format {
        format: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("unsupported data in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed table {path} line {line}: {reason}")]
    Table {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("dataset ids do not match between results and site labels: {0}")]
    IdMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        format: &'static str,
        path: impl Into<PathBuf>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Format {
            format,
            path: path.into(),
            reason: reason.into(),
        }
    }
}
