//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

use crate::importance::Method;

/// Errors produced by the core operations.
///
/// Shape mismatches between values that should be congruent (a batch and
/// a network, two importance maps, ...) are reported as [`Error::Dimension`]
/// with a message naming the offending operand. Misuse of an API (empty
/// dataset, bad label, empty grid, ...) is an [`Error::InvalidArgument`]
/// or one of the dedicated variants below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Two operands have incompatible shapes; the message names them.
    Dimension(String),
    /// An operation that needs at least one sample got none.
    EmptyDataset(&'static str),
    /// Caller-side misuse that is not a shape problem.
    InvalidArgument(String),
    /// Two importance maps of different estimators were combined.
    MethodMismatch { expected: Method, found: Method },
    /// Training produced a non-finite loss at the given step (0-based,
    /// counted within the current task).
    NonFinite { step: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::EmptyDataset(what) => write!(f, "empty dataset passed to {what}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::MethodMismatch { expected, found } => {
                write!(f, "importance method mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite { step } => {
                write!(f, "training diverged: non-finite loss at step {step}")
            }
        }
    }
}

impl core::error::Error for Error {}
