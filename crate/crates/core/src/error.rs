use thiserror::Error;

/// Errors raised by the solver and the inequality harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A graded angular quadrature did not settle into geometric decay.
    #[error("quadrature for {what} did not converge (observed shell ratio {rate:.4})")]
    NonConvergence { what: String, rate: f64 },

    #[error("distributions live on different grids")]
    GridMismatch,

    #[error("snapshot i/o: {0}")]
    Io(String),

    #[error("time integration unstable at t = {time}: {detail}")]
    Unstable { time: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
