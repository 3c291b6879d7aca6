use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    /// Design matrix is rank deficient; `column` is the first column found to
    /// lie in the span of the preceding ones.
    #[error("singular design: column `{column}` is collinear with earlier columns")]
    Singular { column: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Prefixes an I/O error with the path it concerns.
    pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Degenerate(_))
    }
}
