use thiserror::Error;

/// Errors produced by the parsing, encoding, inference and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Structural problem with an input table (for example a missing column).
    #[error("format error: {0}")]
    Format(String),

    /// A row of a wordlist failed validation.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    /// A data-level validation failure not tied to a single row.
    #[error("validation error: {0}")]
    Validation(String),

    /// Syntax error in a Newick or Nexus document.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Argument outside the domain of a numerical routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A taxon required by the operation is not present.
    #[error("unknown taxon: {0}")]
    UnknownTaxon(String),

    /// The requested quantity is not defined for the given input.
    #[error("undefined: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn parse_at_line(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub(crate) fn parse_at_pos(pos: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("position {pos}"),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
