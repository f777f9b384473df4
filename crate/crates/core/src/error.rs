use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("loss rate must lie in (0, 1), got {0}")]
    LossRate(f64),

    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),

    #[error("uniform draw must lie in (0, 1), got {0}")]
    UniformOutOfRange(f64),

    #[error("n_rounds = {n_rounds} is less than 10 x warmup_rounds = {warmup_rounds}")]
    WarmupDominated { n_rounds: u64, warmup_rounds: u64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(
        "power iteration did not converge after {iterations} iterations (L1 residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("tail mass {mass:e} at w_max = {w_max} exceeds 1e-6")]
    TailMass { w_max: usize, mass: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
