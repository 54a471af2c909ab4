use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A source row could not be turned into a sample. `row` is 1-based and
    /// counts the header as row 1.
    #[error("ingest error at {path}:{row}: {msg}")]
    Ingest { path: String, row: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("zero-norm error: token sum has zero Euclidean norm")]
    ZeroNorm,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("corrupt cache {path}: record {index}{}: {msg}", id.as_ref().map(|i| format!(" (id {i:?})")).unwrap_or_default())]
    Corrupt {
        path: String,
        index: usize,
        id: Option<String>,
        msg: String,
    },

    #[error("missing embeddings for {} id(s): {}", ids.len(), ids.join(", "))]
    Lookup { ids: Vec<String> },

    #[error("missing feature role `{0}`")]
    MissingFeature(&'static str),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingest { .. } => "ingest",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Shape(_) => "shape",
            Error::ZeroNorm => "zero_norm",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Corrupt { .. } => "corrupt",
            Error::Lookup { .. } => "lookup",
            Error::MissingFeature(_) => "missing_feature",
            Error::Numerical(_) => "numerical",
            Error::Contract(_) => "contract",
            Error::Protocol(_) => "protocol",
            Error::Json { .. } => "json",
        }
    }
}
