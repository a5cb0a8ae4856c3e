use crate::problem::SaddleReference;

/// Errors produced by solver construction, execution, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid value for `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("solver diverged at outer iteration {iteration}: residual {residual:.6e} exceeds {limit:.6e}")]
    Divergence {
        iteration: usize,
        residual: f64,
        limit: f64,
    },

    #[error("conjugate gradient did not converge within {max_iter} iterations (residual {residual:.6e}, tol {tol:.6e})")]
    CgNoConvergence {
        max_iter: usize,
        residual: f64,
        tol: f64,
    },

    #[error(
        "reference run did not converge within {budget} iterations (best residual {residual:.6e})"
    )]
    ReferenceNotConverged {
        budget: usize,
        residual: f64,
        best: Box<SaddleReference>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
