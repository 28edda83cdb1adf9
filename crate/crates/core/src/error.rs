use thiserror::Error;

use crate::validate::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("diagram is not well-formed:\n{0}")]
    Invalid(ValidationReport),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("decision index {index} out of range (diagram has {count} decisions)")]
    DecisionOutOfRange { index: usize, count: usize },

    #[error("inconsistent context: evidence has zero probability")]
    InconsistentContext,

    #[error("state space of {size} entries exceeds the guard of {limit}")]
    GuardExceeded { size: u128, limit: u128 },

    #[error("malformed decision table: {0}")]
    MalformedCpt(String),

    #[error("variable `{0}` is already bound in this context")]
    AlreadyBound(String),

    #[error("no leaf with the given context")]
    NoSuchLeaf,

    #[error("maze: {0}")]
    Maze(String),

    #[error("policy does not match diagram: {0}")]
    PolicyMismatch(String),

    #[error("no episodes requested")]
    NoEpisodes,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
