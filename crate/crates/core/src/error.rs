use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian within tolerance")]
    Hermiticity,

    #[error("outcome set invalid: {0}")]
    Outcome(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid measurement model: {0}")]
    Model(String),

    #[error("refinement basis incompatible with observable: {0}")]
    Refinement(String),

    #[error("instrument does not measure the given observable: {0}")]
    NotCompatible(String),

    #[error("probe state is not pure within tolerance")]
    MixedProbe,

    #[error("apparatus is not local in the requested subsystem: {0}")]
    NotLocal(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
