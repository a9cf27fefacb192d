use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation insufficient: {context} (leakage {leakage:.3e} exceeds {tol:.1e})")]
    TruncationInsufficient {
        context: String,
        leakage: f64,
        tol: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature on tabulated ramp failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("step size too coarse: halving the step changed elements by {defect:.3e} (> {tol:.1e})")]
    StepSizeTooCoarse { defect: f64, tol: f64 },

    #[error("confusion matrix ill-conditioned: condition number {0:.3e}")]
    IllConditioned(f64),

    #[error("two-level integration failed to converge: residual {0:.3e}")]
    IntegrationFailure(f64),

    #[error("work distribution has zero variance")]
    ZeroVariance,

    #[error("fitted support too small: mass {mass:.3e} at top level n = {n}")]
    SupportTooSmall { n: usize, mass: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
