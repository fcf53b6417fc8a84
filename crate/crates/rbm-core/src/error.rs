use thiserror::Error;

/// Library-wide error type. The two public categories map onto distinct CLI
/// exit codes: invalid parameters (2) and numerical non-convergence (3).
#[derive(Debug, Error)]
pub enum Error {
    /// Parameters outside the supported domain, or resource budgets exceeded.
    #[error("validation: {0}")]
    Validation(String),

    /// An iterative computation failed to reach its tolerance.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn non_convergence(msg: impl Into<String>) -> Self {
        Error::NonConvergence(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
