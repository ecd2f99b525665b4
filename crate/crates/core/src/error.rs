use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image format: {0}")]
    Format(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("wrong spectrum kind: expected {expected}, got {actual}")]
    Kind { expected: String, actual: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("division by zero in reference bin(s) {bins:?}")]
    ZeroReference { bins: Vec<usize> },

    #[error("data error: {0}")]
    Data(String),

    #[error("optimizer failed to converge: {0}")]
    Convergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
