//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; carries the 1-based line number when known.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    /// An input violates a structural precondition (bad index, isolated node, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Inconsistent or unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A requested dense tensor exceeds the configured element budget.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Numerical breakdown inside a solver (non-finite values, instability).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Synthetic dataset generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Prefix the message with the pipeline stage it came from, keeping the
    /// error class (and exit code) intact.
    pub fn tag_stage(self, stage: &str) -> Self {
        match self {
            Error::Format { line, msg } => Error::Format {
                line,
                msg: format!("{stage}: {msg}"),
            },
            Error::Validation(m) => Error::Validation(format!("{stage}: {m}")),
            Error::Config(m) => Error::Config(format!("{stage}: {m}")),
            Error::Capacity(m) => Error::Capacity(format!("{stage}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{stage}: {m}")),
            Error::Generation(m) => Error::Generation(format!("{stage}: {m}")),
            Error::Io(e) => Error::Io(e),
        }
    }

    /// Stable process exit code for each error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Validation(_) | Error::Config(_) => 2,
            Error::Capacity(_) => 3,
            Error::Numerical(_) | Error::Generation(_) => 4,
            Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
