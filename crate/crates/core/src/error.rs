use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample budget exceeded at {point:?}: {requested} samples requested, cap is {cap}")]
    BudgetExceeded {
        point: Vec<i64>,
        requested: u64,
        cap: u64,
    },

    /// Ill-conditioned barrier system or a Newton iteration that did not converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver failed: {0}")]
    SolverFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
