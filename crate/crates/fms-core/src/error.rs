//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: expected {expected} points, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in sample `{id}` at index {index}")]
    NonFiniteValue { id: String, index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("negative weight at index {index}")]
    NegativeWeight { index: usize },

    #[error("all weights are zero")]
    ZeroMass,

    #[error("insufficient data: need at least {needed} members, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("coincident point at member index {index}")]
    CoincidentPoint { index: usize },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("too few knots: need at least {needed}, got {got}")]
    TooFewKnots { needed: usize, got: usize },

    #[error("no input")]
    NoInput,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::GridMismatch { .. } => "GridMismatch",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NegativeWeight { .. } => "NegativeWeight",
            Error::ZeroMass => "ZeroMass",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::CoincidentPoint { .. } => "CoincidentPoint",
            Error::InvalidExperiment(_) => "InvalidExperiment",
            Error::TooFewKnots { .. } => "TooFewKnots",
            Error::NoInput => "NoInput",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Format(_) => "Format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
