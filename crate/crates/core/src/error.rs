use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("placement realized no agents")]
    EmptyPlacement,

    #[error("{what} of {requested} exceeds the supported maximum of {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("operation requires a grid topology, got {0}")]
    UnsupportedTopology(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("model comparison failed: {0}")]
    Comparison(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
