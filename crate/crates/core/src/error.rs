use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),

    /// A mandatory column is absent or the table layout cannot be understood.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Constant or otherwise unusable input to a statistic.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("correlation is exactly +/-1; the F statistic is infinite")]
    InfiniteF,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("{0} failed to converge")]
    NoConvergence(&'static str),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
