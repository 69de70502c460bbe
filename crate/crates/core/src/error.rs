use thiserror::Error;

/// Errors raised across the model, sampler and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular logit link: reference category has zero probability")]
    SingularLink,

    #[error("covariance error: {0}")]
    Covariance(String),

    /// Every state had zero filtered mass at time `t` (0-based).
    #[error("filtering degeneracy at t = {t}")]
    FilteringDegeneracy { t: usize },

    /// Sampler abort with the offending individual and time step.
    #[error("filtering degeneracy for individual {individual} at t = {t}")]
    ChainDegeneracy { individual: usize, t: usize },

    #[error("non-finite parameter at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error (row {row}): {msg}")]
    Data { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
