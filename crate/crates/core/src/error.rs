use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front-ends to pick exit codes and status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input encoding, malformed files.
    Format,
    /// Structurally valid input that violates an invariant.
    Integrity,
    /// Caller asked for something out of bounds or not computable.
    Request,
    /// Operating system level failures.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Format { source_name: String, line: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("sentence {sentence}: {message}")]
    Tree { sentence: String, message: String },

    #[error("{what} {index} out of range (limit {limit})")]
    Range { what: &'static str, index: usize, limit: usize },

    #[error("sequence of {len} tokens exceeds context length {n_ctx}")]
    Length { len: usize, n_ctx: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("alignment error in sentence {sentence}: {message}")]
    Alignment { sentence: String, message: String },

    #[error("requested {requested} records but only {available} are available")]
    Size { requested: usize, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("stale attention store: store was built for manifest {store}, corpus manifest is {current}")]
    Stale { store: String, current: String },

    #[error("invalid setting `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Format { .. } | Error::Json(_) => ErrorKind::Format,
            Error::Integrity(_) | Error::Tree { .. } | Error::Alignment { .. } | Error::Stale { .. } => ErrorKind::Integrity,
            Error::Range { .. }
            | Error::Length { .. }
            | Error::EmptyInput(_)
            | Error::Size { .. }
            | Error::InsufficientData(_)
            | Error::UndefinedCorrelation(_)
            | Error::Config { .. } => ErrorKind::Request,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn format(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
