use thiserror::Error;

/// Errors produced while loading, validating, or solving a dispatch problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EldpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unit {unit}: {reason}")]
    InvalidGenerator { unit: usize, reason: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dispatch has {got} entries but the problem has {expected} generators")]
    LengthMismatch { expected: usize, got: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid surrogate: {0}")]
    InvalidSurrogate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EldpError {
    fn from(err: std::io::Error) -> Self {
        EldpError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EldpError>;
