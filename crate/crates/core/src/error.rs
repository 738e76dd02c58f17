use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("Bregman divergence is infinite: {0}")]
    DivergenceInfinite(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value encountered: {0}")]
    Numerics(String),

    #[error("omega_d is unbounded for this setup: {0}")]
    UnboundedOmega(String),

    #[error("setup cannot be recentered: {0}")]
    UnsupportedRecenter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolver { iterations: usize, residual: f64 },

    #[error("restart stage {stage} stalled: distance ratio {ratio:.4} exceeds {limit:.4}")]
    RestartStall { stage: usize, ratio: f64, limit: f64 },

    #[error("worker {index} failed: {source}")]
    Worker {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
