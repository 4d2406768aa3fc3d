use std::path::PathBuf;

/// Errors produced by scene construction, rendering, training, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument or configuration was violated.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Two tensors (or a tensor and an expected layout) disagree on shape.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    /// An index referred past the end of a collection.
    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: String,
        index: usize,
        len: usize,
    },

    /// A file existed but its contents could not be interpreted.
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// An underlying read or write failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A non-finite value surfaced where the math requires finite numbers.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
