use thiserror::Error;

use crate::Edge;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: n = {n}, need n >= {min}")]
    InvalidSize { n: usize, min: usize },

    #[error("invalid integer range: L must be >= 1")]
    InvalidRange,

    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("inconsistent restriction: {0}")]
    InconsistentRestriction(String),

    /// No perfect matching respects the restriction. `rows` is a set of free
    /// rows whose admissible columns `cols` are strictly fewer than the rows.
    #[error("infeasible restriction: rows {rows:?} can only reach columns {cols:?}")]
    Infeasible { rows: Vec<usize>, cols: Vec<usize> },

    #[error("invalid edge {edge:?}: {reason}")]
    InvalidEdge { edge: Edge, reason: &'static str },

    #[error("{what} supports n <= {limit}, got n = {n}")]
    SizeGuard {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("invalid substitution: {0}")]
    InvalidSubstitution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),
}
