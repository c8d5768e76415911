//! Error type shared by every operation in the crate.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the rounding engine.
///
/// Every variant is a *caller* error (bad arguments or malformed input);
/// the algorithms themselves never fail once preconditions hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated (message explains which).
    InvalidArgument(String),
    /// A probability was expected to lie on the 1/k grid but does not.
    OffGrid {
        /// Index of the offending entry.
        index: usize,
        /// The value found there.
        value: f64,
        /// The grid granularity.
        k: u32,
    },
    /// The same (row, column) position was supplied twice when building a matrix.
    DuplicateEntry {
        /// Row of the duplicated position.
        row: usize,
        /// Column of the duplicated position.
        col: usize,
    },
    /// An index was outside the declared dimensions.
    IndexOutOfRange {
        /// What the index was addressing ("row", "column", "vertex", …).
        kind: &'static str,
        /// The offending index.
        index: usize,
        /// The exclusive bound it had to respect.
        bound: usize,
    },
    /// A weight was not strictly positive and finite.
    BadWeight {
        /// Row of the offending entry.
        row: usize,
        /// Column of the offending entry.
        col: usize,
        /// The value found there.
        value: f64,
    },
    /// A dimension mismatch between two arguments (message explains which).
    DimensionMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OffGrid { index, value, k } => write!(
                f,
                "entry {index} = {value} is not a multiple of 1/{k} (within tolerance)"
            ),
            Error::DuplicateEntry { row, col } => {
                write!(f, "duplicate entry at row {row}, column {col}")
            }
            Error::IndexOutOfRange { kind, index, bound } => {
                write!(f, "{kind} index {index} out of range (must be < {bound})")
            }
            Error::BadWeight { row, col, value } => write!(
                f,
                "weight at row {row}, column {col} must be finite and > 0, got {value}"
            ),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl Error {
    /// Shorthand for [`Error::InvalidArgument`] from format arguments.
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(alloc::format!("{msg}"))
    }
}
