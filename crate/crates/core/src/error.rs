use thiserror::Error;

/// Errors surfaced by the simulator, the bound calculators and the harness.
#[derive(Debug, Error)]
pub enum UmdaError {
    #[error("invalid dimension n = {0}: need n >= 2")]
    InvalidDimension(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("delta must lie in the open interval (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("invalid fitness: {0}")]
    InvalidFitness(String),

    #[error("population was evaluated under {0}, expected leading_ones")]
    NotLeadingOnes(String),

    #[error("backend {backend} cannot evaluate {fitness}")]
    UnsupportedBackend { backend: String, fitness: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = UmdaError> = std::result::Result<T, E>;
