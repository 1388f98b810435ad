use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: I/O error: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: malformed row: {message}", path.display())]
    MalformedRow {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("instance {id}: {message}")]
    InvalidInstance { id: String, message: String },

    #[error("duplicate instance id {0}")]
    DuplicateId(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("runner {command:?} exited with {status}: {stderr}")]
    RunnerFailed {
        command: String,
        status: String,
        stderr: String,
    },

    #[error("runner {command:?} timed out after {seconds}s")]
    RunnerTimeout { command: String, seconds: u64 },

    #[error("{0}")]
    Protocol(String),

    #[error("missing prediction for id {0}")]
    MissingPrediction(String),

    #[error("duplicate prediction for id {0}")]
    DuplicatePrediction(String),

    #[error("prediction for unknown id {0}")]
    UnknownPrediction(String),

    #[error("model handle {}: {message}", dir.display())]
    ModelHandle { dir: PathBuf, message: String },

    #[error("empty instance set")]
    EmptyInstances,

    #[error("class partitions differ between runs: {0}")]
    ClassMismatch(String),

    #[error("experiment cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Report(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInstance {
            id: id.into(),
            message: message.into(),
        }
    }

    #[cfg(feature = "orchestration")]
    pub(crate) fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::Cell {
            cell: cell.into(),
            source: Box::new(self),
        }
    }
}
