use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("compactness 2M/R = {compactness} is at or beyond the Buchdahl bound 8/9")]
    Compactness { compactness: f64 },

    #[error("invalid star configuration: {0}")]
    InvalidStar(String),

    #[error("no surface found for polytropic index n = {n} before xi = {xi_max}")]
    NoSurface { n: f64, xi_max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("explicit step {dt} exceeds stability bound {bound}; use implicit stepping")]
    Stability { dt: f64, bound: f64 },

    #[error("density is not normalisable on the interval: {0}")]
    Normalization(String),

    #[error("insufficient paths: need at least {needed}, got {got}")]
    InsufficientPaths { needed: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
