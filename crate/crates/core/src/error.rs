use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape error at layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("invalid value: {0}")]
    Value(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver did not converge within {0} iterations")]
    Convergence(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("problem dimension {dim} exceeds the dense cap {cap}")]
    Size { dim: usize, cap: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver failed at layer {layer}: {message}")]
    Solver { layer: usize, message: String },

    #[error("layer {0} propagates a zero quadratic form")]
    DegenerateLayer(usize),

    #[error("certificate verification failed: {0}")]
    Verification(String),

    #[error("deadline exceeded")]
    Timeout,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(layer: usize, message: impl Into<String>) -> Self {
        Error::Shape {
            layer,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Shape { .. }
            | Error::Value(_)
            | Error::Argument(_)
            | Error::NonFinite(_)
            | Error::Size { .. }
            | Error::Io(_) => 2,
            Error::Verification(_) => 4,
            _ => 3,
        }
    }
}
