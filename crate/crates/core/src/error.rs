use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("segment ids do not align; missing: {missing:?}")]
    Alignment { missing: Vec<u64> },

    #[error("duplicate key: {0}")]
    DuplicateKey(String),

    #[error("kernel overflow")]
    KernelOverflow,

    #[error("tree has {nodes} nodes, exceeding the enumeration limit of {limit}")]
    NodeLimit { nodes: usize, limit: usize },

    #[error("no usable pairs")]
    NoUsablePairs,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("missing metric: {0}")]
    MissingMetric(String),

    #[error("missing score: {0}")]
    MissingScore(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input files or arguments, as opposed to
    /// failures of a computation over well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::Validation(_)
                | Error::Io { .. }
                | Error::Alignment { .. }
                | Error::DuplicateKey(_)
                | Error::NodeLimit { .. }
                | Error::MissingMetric(_)
                | Error::MissingScore(_)
                | Error::Empty(_)
                | Error::InvalidArgument(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
