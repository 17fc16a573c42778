use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or graph node received a shape it cannot work with.
    #[error("shape mismatch at {node}: expected {expected}, got {actual}")]
    Shape {
        node: String,
        expected: String,
        actual: String,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: String,
        index: usize,
        size: usize,
    },

    #[error("missing binding for graph input `{0}`")]
    MissingInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates a data contract (unknown tid, empty corpus, ...).
    #[error("{0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Format(String),

    #[error("non-finite {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(
        node: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            node: node.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
