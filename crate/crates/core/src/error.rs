use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 schema/parameter, 3 numeric, 4 resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::GridTooCoarse(_) | Error::Schema(_) => 2,
            Error::NoConvergence { .. } | Error::Numeric(_) | Error::NonFinite(_) => 3,
            Error::Resource(_) | Error::Io(_) => 4,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
