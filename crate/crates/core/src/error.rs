use thiserror::Error;

/// Errors raised by the localization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{0}` has no assigned level")]
    Unleveled(String),

    #[error("node `{anchor}` is not a dynamic anchor of `{target}`")]
    NotAnAnchor { anchor: String, target: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular Fisher information (condition number {condition:.3e})")]
    SingularFisher { condition: f64 },

    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
