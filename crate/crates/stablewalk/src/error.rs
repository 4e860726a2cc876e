//! Crate-wide error type.
//!
//! Errors fall into three families that the CLI maps onto exit codes:
//! parameter/validation problems (exit 2), numerical-quality failures
//! detected at runtime (exit 3), and plain I/O trouble.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an admissibility condition. The message names
    /// the condition and shows both sides evaluated numerically.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A grid cannot represent the requested object within its accuracy
    /// budget (aliasing, leakage past the periodic boundary, Nyquist).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// An iteration failed to converge or a quality gate failed.
    #[error("numerical quality: {0}")]
    Numerical(String),

    /// A requested allocation exceeds the configured memory budget.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Evaluation outside the domain of a tabulated or time-gated object.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::Domain(_) | Error::Capacity(_) => 2,
            Error::Resolution(_) | Error::Numerical(_) => 3,
            Error::Io(_) => 1,
        }
    }
}
