use thiserror::Error;

/// Errors raised by the numerical layers and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("t = {t} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge: estimate {value:e}, achieved error {achieved:e}")]
    Quadrature { value: f64, achieved: f64 },

    #[error("growth hypothesis violated at t = {t}: t f'(t)/f(t) = {ratio} (needs > 1)")]
    HypothesisViolation { t: f64, ratio: f64 },

    #[error("divergent integral: tail exponent {exponent} does not exceed 1")]
    DivergentIntegral { exponent: f64 },

    #[error("inversion out of range for v = {v:e}: bracket reached [{lo:e}, {hi:e}]")]
    InversionRange { v: f64, lo: f64, hi: f64 },

    #[error("mesh needs at least {min} nodes, got {got}")]
    MeshTooSmall { min: usize, got: usize },

    #[error("node at delta = {delta:e} is too close to the boundary (needs delta >= {min_delta:e})")]
    Proximity { delta: f64, min_delta: f64 },

    #[error("source is not integrable against delta^s: boundary exponent {exponent} gives weighted exponent {weighted} <= -1")]
    Integrability { exponent: f64, weighted: f64 },

    #[error("exterior data inadmissible: {0}")]
    DataInadmissible(String),

    #[error("iteration did not converge after {iterations} iterations (last gap {last_gap:e})")]
    NonConvergence {
        iterations: usize,
        last_gap: f64,
        history: Vec<f64>,
    },

    #[error("supersolution check failed at {} nodes (worst residual {worst:e})", .nodes.len())]
    Supersolution { nodes: Vec<usize>, worst: f64 },

    #[error("discrete comparison principle violated: {0}")]
    Discretization(String),

    #[error("insufficient data for fit: {got} nodes in window, need {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
