//! Error type shared by the core modules.

use alloc::string::String;
use core::fmt;

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by dataset preparation, graph construction, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A text record could not be parsed. Line numbers are 1-based.
    Parse { line: usize, message: String },
    /// Matrix or index dimensions do not agree.
    Shape { context: &'static str, expected: (usize, usize), got: (usize, usize) },
    /// The interaction data violates a structural precondition.
    Data(String),
    /// A graph node has no interactions, so its degree normalization is undefined.
    ZeroDegreeNode { node: usize },
    /// A non-finite value appeared during the forward pass or loss evaluation.
    Diverged { context: &'static str, index: usize },
    /// An invalid configuration value.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Shape { context, expected, got } => write!(
                f,
                "shape mismatch in {context}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::Data(msg) => write!(f, "invalid interaction data: {msg}"),
            Error::ZeroDegreeNode { node } => {
                write!(f, "node {node} has zero degree; normalization undefined")
            }
            Error::Diverged { context, index } => {
                write!(f, "non-finite value in {context} (index {index}); model diverged")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
