use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (max asymmetry {0:e})")]
    NotSkewSymmetric(f64),

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no measurement channels were given")]
    NoChannels,

    #[error("Riccati solution lost positive definiteness at t = {t:.6} s (reduce dt or check observability)")]
    RiccatiNotPositiveDefinite { t: f64 },

    #[error("observer state became non-finite at t = {t:.6} s")]
    NonFinite { t: f64 },

    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

    #[error("numerical divergence at t = {t:.6} s: {reason}")]
    Divergence { t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
