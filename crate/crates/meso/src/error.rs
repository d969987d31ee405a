//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents do not satisfy an operation's shape contract.
    #[error("shape error: {0}")]
    Shape(String),

    /// A numeric precondition was violated (division by zero, NaN input, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Problem with dataset contents or labels.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed file contents (bad magic, header, truncation, ...).
    #[error("format error: {0}")]
    Format(String),

    /// A structurally valid file whose directory entries are inconsistent.
    #[error("corruption error: {0}")]
    Corruption(String),

    /// A model file that parses but is missing required tensors.
    #[error("incomplete model: {0}")]
    IncompleteModel(String),

    /// An API called outside its contract (e.g. backward with a foreign cache).
    #[error("usage error: {0}")]
    Usage(String),

    /// Batch statistics cannot be computed from the given batch.
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    /// Eye landmarks that do not determine an alignment transform.
    #[error("degenerate landmarks: {0}")]
    DegenerateLandmarks(String),

    /// Source and target architectures cannot be mapped onto each other.
    #[error("incompatible architecture: {0}")]
    IncompatibleArchitecture(String),

    /// A transfer source model that is not a 2-class binary model.
    #[error("transfer source error: {0}")]
    TransferSource(String),

    /// A metric that is undefined for the given inputs (e.g. single-class ROC).
    #[error("undefined curve: {0}")]
    UndefinedCurve(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
