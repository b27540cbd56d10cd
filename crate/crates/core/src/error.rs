use alloc::string::String;

use thiserror::Error;

/// Errors raised by the model, sampler and analysis kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid count panel: {0}")]
    InvalidPanel(String),

    #[error("invalid covariate series: {0}")]
    InvalidCovariates(String),

    #[error("invalid parameter state: {0}")]
    InvalidState(String),

    #[error("invalid prior configuration: {0}")]
    InvalidPrior(String),

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("log posterior is not finite at initialization ({component})")]
    NonFiniteStart { component: String },

    #[error("precision matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid posterior has no finite density in the requested bounds")]
    EmptyGrid,

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
