use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("resolution too small: need at least 3 interior nodes per axis, got {0}")]
    ResolutionTooSmall(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The principal eigenvalue of `-(Δ + a)` is nonnegative, so zero is the
    /// only nonnegative steady state.
    #[error("subcritical: λ₁(a) = {lambda1:.6e} ≥ 0, no positive steady state")]
    Subcritical { lambda1: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton iteration diverged at step {}: residual trace {trace:?}", trace.len())]
    NewtonDivergence { trace: Vec<f64> },

    #[error("{0}")]
    NotPositive(String),

    #[error("singular matrix: zero pivot at row {0}")]
    Singular(usize),

    #[error("negative initial data at node {node} ({value:.3e})")]
    NegativeInitialData { node: usize, value: f64 },

    #[error("positivity lost at t = {time:.6} node {node} (value {value:.3e})")]
    PositivityLoss { time: f64, node: usize, value: f64 },

    #[error("time step {dt:.3e} inadmissible at t = {time:.6}: dt·max rate = {product:.3} > 0.5")]
    InadmissibleStep { dt: f64, time: f64, product: f64 },

    #[error("decay fit needs at least 5 usable samples, found {0}")]
    InsufficientSamples(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("empty sweep")]
    EmptySweep,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
