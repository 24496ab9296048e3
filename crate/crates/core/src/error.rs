//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by mode construction, filtering, simulation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Rates too close together; the partial-fraction coefficients diverge.
    #[error("degenerate poles: {0}")]
    DegeneratePoles(String),

    #[error("unsupported mode kind: {0}")]
    UnsupportedMode(String),

    /// The sampling interval does not resolve every filter pole.
    #[error("undersampled filter: {0}")]
    UndersampledFilter(String),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid user input (configs, parameters)
    /// rather than by runtime or data failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DegeneratePoles(_)
                | Error::UnsupportedMode(_)
                | Error::UndersampledFilter(_)
                | Error::GridMismatch(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
