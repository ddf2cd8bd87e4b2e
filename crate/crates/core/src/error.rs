use thiserror::Error;

#[derive(Error, Debug)]
pub enum SpdeError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("branch tracking failed at t = {t}: {reason}")]
    BranchTracking { t: f64, reason: String },
    #[error("divergence at t = {t}: norm {norm:e} exceeds guard {guard:e}")]
    Divergence { t: f64, norm: f64, guard: f64 },
    #[error("step size fell below floor {floor:e} at t = {t}")]
    StepFloor { t: f64, floor: f64 },
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SpdeError>;
