use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed configuration text.
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    /// Well-formed input whose value breaks a model invariant.
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    /// Arguments outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("measurement schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
