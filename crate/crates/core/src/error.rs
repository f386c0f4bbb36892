use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or a request the inputs cannot satisfy.
    #[error("{0}")]
    Usage(String),
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    /// Input data violates a structural requirement.
    #[error("{0}")]
    Data(String),
    #[error("cannot combine an empty factor vector")]
    EmptyFactors,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
