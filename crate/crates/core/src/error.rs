use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numerical failure at step {step:?}: {msg}")]
    Numerical { step: Option<usize>, msg: String },
    #[error("iterate diverged at step {step} (norm {norm:e})")]
    Divergence { step: usize, norm: f64 },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("oracle failed: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attach a step index to a numerical error that lacks one.
    pub fn at_step(self, k: usize) -> Self {
        match self {
            Error::Numerical { step: None, msg } => Error::Numerical { step: Some(k), msg },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
