use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("environment error: {0}")]
    Env(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The two routes of the performance-difference identity disagree.
    #[error("CONVENTION_MISMATCH: direct J difference {direct} vs decomposition {decomposed}")]
    ConventionMismatch { direct: f64, decomposed: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
