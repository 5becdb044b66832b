//! Error type shared by every module of the engine.

use crate::coalition::Coalition;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Exact enumeration was requested for more features than the cap allows.
    #[error("{features} features exceed the exact-enumeration cap of {cap}; use the sampling estimator")]
    CapExceeded { features: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model format error at `{path}`: {message}")]
    ModelFormat { path: String, message: String },

    #[error("background data is empty")]
    EmptyBackground,

    /// No background row matches the instance on the conditioned features.
    #[error("no background rows match the instance on coalition {0}")]
    EmptyConditioningSet(Coalition),

    #[error("stratum `{0}` has no rows in the data")]
    EmptyStratum(String),

    #[error("point ({x1}, {x2}) is off the data manifold x2 = I(x1 > 0)")]
    OffManifold { x1: f64, x2: f64 },

    #[error("data error: {0}")]
    Data(String),

    /// A value-function failure, tagged with the coalition being evaluated.
    #[error("value function failed for coalition {coalition}: {source}")]
    AtCoalition {
        coalition: Coalition,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any coalition context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtCoalition { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at(self, coalition: Coalition) -> Error {
        match self {
            e @ Error::AtCoalition { .. } => e,
            e => Error::AtCoalition {
                coalition,
                source: Box::new(e),
            },
        }
    }
}
