use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("expected a {expected}-form, got a {found}-form")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("degenerate metric at grid index {index}: {detail}")]
    DegenerateMetric { index: usize, detail: String },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: String, step: usize },

    #[error("evolution aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String },

    #[error("{what} is not closed: max |d{what}| = {max:.3e} exceeds {limit:.3e}")]
    NotClosed { what: String, max: f64, limit: f64 },

    #[error("period {period} of {what} is not in 2πZ (off by {offset:.3e})")]
    NotIntegral { what: String, period: f64, offset: f64 },

    #[error("hypothesis `{name}` failed: {detail}")]
    Hypothesis { name: &'static str, detail: String },

    #[error("Newton iteration did not converge after {iterations} iterations (last residual {last:.3e})")]
    NoConvergence { iterations: usize, last: f64, history: Vec<f64> },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("map is not grid compatible: {0}")]
    IncompatibleMap(String),

    #[error("GFLD format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
