use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("privacy budget must be positive and finite, got {0}")]
    InvalidBudget(f64),

    #[error("mechanism {0} requires a privacy budget")]
    MissingBudget(&'static str),

    #[error("mechanism input must lie in [-1, 1], got {0}")]
    OutOfDomain(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("accuracy is undefined for {0}")]
    NotAClassifier(&'static str),

    #[error("invalid session config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no training epoch has been run yet")]
    NotTrained,

    #[error("invalid session snapshot: {0}")]
    InvalidSnapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
