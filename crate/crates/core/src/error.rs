use thiserror::Error;

/// Errors raised by the solvers and models in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Evaluation outside the domain of a function, e.g. a kernel at the origin.
    #[error("domain error: {0}")]
    Domain(String),

    /// A theorem-level hypothesis required by the requested experiment does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(
        "quadrature did not converge (achieved error {achieved:.3e}, requested {requested:.3e})"
    )]
    Quadrature { achieved: f64, requested: f64 },

    /// The Lévy integrability integral has no finite value.
    #[error("jump kernel is not integrable: {piece} piece diverges (partial value {partial:.6e})")]
    Divergent { piece: &'static str, partial: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("eigenvector changes sign at {negative} of {total} interior nodes; refine the grid")]
    PerronViolation { negative: usize, total: usize },

    #[error("logic error: {0}")]
    Logic(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
