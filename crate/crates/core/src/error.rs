//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A delimited-text input did not match its documented column schema.
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// A row or value violated a field contract (negative count, bad enum, ...).
    /// `row` is the 1-based data-row number (header excluded).
    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    /// Two input rows claimed the same grid cell.
    #[error("conflict: cell ({key}) filled by rows {first_row} and {second_row}")]
    Conflict {
        key: String,
        first_row: usize,
        second_row: usize,
    },

    /// A configuration value is out of range or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Degenerate or invalid geometry input.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Pointing or ephemeris data does not cover a requested time.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A statistic was requested over an empty (fully masked) region.
    #[error("missing data: {0}")]
    MissingData(String),

    /// No rows available to train on.
    #[error("training data error: {0}")]
    TrainingData(String),

    /// An operation's caller contract was violated (shape/schema mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A background estimate could not be formed.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A rate is undefined because no good exposure exists.
    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
