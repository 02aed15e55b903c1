use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("order {0} is below -1/2")]
    OrderOutOfRange(f64),

    #[error("gamma function pole at {0}")]
    GammaPole(f64),

    #[error("step size collapsed at r = {r} (last good radius {last_good})")]
    StepCollapse { r: f64, last_good: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("unsupported origin class for this solver: {0}")]
    UnsupportedOrigin(String),

    #[error("unbounded tail: {0}")]
    UnboundedTail(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("iteration did not converge after {iterations} sweeps (last change {last_change:e})")]
    Diverged { iterations: usize, last_change: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("normalization mismatch: {0}")]
    Normalization(String),

    #[error("invalid potential specification: {0}")]
    Spec(String),

    #[error("{0}")]
    Invalid(String),
}
