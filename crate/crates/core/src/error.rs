use thiserror::Error;

/// Errors produced by any toolkit operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input file could not be parsed; `row` is 1-based where applicable.
    #[error("format error (row {row}): {message}")]
    Format { row: usize, message: String },

    /// Point dimensions or vector lengths disagree.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An argument violates an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A clustering energy is undefined for the given partition
    /// (empty cluster, zero weight, zero degree).
    #[error("energy undefined: {0}")]
    Energy(String),

    /// A numeric quantity left the domain of a formula (log of a
    /// nonpositive value, negative base under a real power, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Exhaustive enumeration was requested for an instance beyond the
    /// supported size.
    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
