use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("particle index {index} out of range for {n} particles")]
    Index { index: usize, n: usize },

    /// The singular weight was evaluated at zero distance between distinct clusters.
    #[error("singular weight evaluated at zero distance between particles {0} and {1}")]
    SingularEvaluation(usize, usize),

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("solution diverged at t = {t:e}")]
    Divergence { t: f64 },

    #[error("continuation stopped after {0} segments")]
    ContinuationLimit(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("solve failed for n = {n}: {source}")]
    Family {
        n: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("mismatched sample grids: {0}")]
    GridMismatch(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularEvaluation(..)
            | Error::StepUnderflow { .. }
            | Error::Divergence { .. }
            | Error::ContinuationLimit(_)
            | Error::InsufficientData(_)
            | Error::GridMismatch(_) => true,
            Error::Family { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
