use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The eigenvalues do not give the variance `2 * nu` the operation assumes.
    #[error("variance mismatch: spec variance {variance} but target requires {expected}")]
    VarianceMismatch { variance: f64, expected: f64 },

    /// An iterative routine did not reach its tolerance. The best estimate
    /// reached so far is kept so callers can decide what to do with it.
    #[error("numeric failure in {routine}: best estimate {estimate}, error estimate {error}")]
    Numeric {
        routine: &'static str,
        estimate: f64,
        error: f64,
    },

    /// A configuration file or CLI argument is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
