use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} is not interior to chart `{chart}`")]
    Domain { chart: String, point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    DegenerateMetric { point: Vec<f64> },
    #[error("jet order {have} is insufficient, {need} required")]
    JetOrder { need: usize, have: usize },
    #[error("dimension {0} not supported here")]
    Dimension(usize),
    #[error("background rejected: {0}")]
    WrongBackground(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("oracle did not converge: {0}")]
    OracleFailure(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("Newton iteration did not converge at t = {t}; reduce the step")]
    StepTooLarge { t: f64 },
    #[error("invalid critical metric: {0}")]
    InvalidCritical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
