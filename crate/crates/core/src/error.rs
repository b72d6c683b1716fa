use thiserror::Error;

use crate::session::Phase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration violates a physical constraint (e.g. Nyquist).
    #[error("configuration error: {0}")]
    Config(String),

    /// Recognition margin fell below the requested threshold. Recoverable:
    /// callers usually retry with a longer window.
    #[error("no decision: confidence {confidence:.4} below threshold {threshold:.4}")]
    NoDecision { confidence: f64, threshold: f64 },

    #[error("cannot encode character {0:?}: not in pinyin dictionary")]
    Encoding(char),

    #[error("event {event} is not valid in phase {phase:?}")]
    PhaseMismatch { phase: Phase, event: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}
