use thiserror::Error;

/// Errors produced by mask generation, tensor ops, training and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an input value was violated. The message names the bound.
    #[error("validation: {0}")]
    Validation(String),

    /// Incompatible tensor shapes. Both shapes are reported.
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    /// NaN or infinity detected at an op boundary.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Training produced a NaN loss.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    /// A file did not match its documented format.
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
