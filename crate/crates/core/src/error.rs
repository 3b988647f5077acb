use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that cannot produce a valid computation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Newton iteration failed to reach the residual tolerance on a collocation row.
    #[error("solver failed at row {row}: residual {residual:e} after {iterations} iterations")]
    Solver {
        row: usize,
        residual: f64,
        iterations: usize,
    },
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
