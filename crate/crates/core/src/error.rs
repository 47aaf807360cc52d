use thiserror::Error;

/// Errors raised by the bound evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The configuration collapses to a case the operation does not cover
    /// (for example zero power for a user).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// A structural check on a derived quantity failed.
    #[error("consistency check failed: {0}")]
    Consistency(String),

    /// An iterative method did not reach its tolerance.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// A solved threshold violates the admissibility constraint of the bound.
    #[error("inadmissible threshold: {0}")]
    Inadmissible(String),

    /// A Monte Carlo term name was not recognised.
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
