use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms. IO errors live in `softle-cli`.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length for the operation.
    ShapeMismatch { context: &'static str, expected: usize, actual: usize },
    /// A value that must be finite was NaN or infinite.
    NonFinite { context: &'static str },
    /// A configuration field violated its constraints.
    InvalidConfig(String),
    /// A dataset violated its invariants.
    InvalidDataset(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
    /// An operation required a model of a different arity or architecture.
    ModelMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { context, expected, actual } => {
                write!(f, "shape mismatch in {context}: expected {expected}, got {actual}")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            Error::Divergence { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
            Error::ModelMismatch(msg) => write!(f, "model mismatch: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
