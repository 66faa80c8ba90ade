use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("duplicate {what} entry {index}")]
    Duplicate { what: &'static str, index: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("topology is degenerate: every transmitter or receiver was pruned")]
    Degenerate,

    #[error("topology is not pruned: {0}")]
    NotPruned(String),

    #[error("size guard exceeded: {what} = {value} > {limit}")]
    SizeGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("mutual information is infinite: {0}")]
    InfiniteMutualInformation(String),

    #[error("allocation infeasible at snr {snr:e}: requires snr >= {threshold:e}")]
    InfeasibleAllocation { snr: f64, threshold: f64 },

    #[error("maximization did not converge: {0}")]
    NonConvergence(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
