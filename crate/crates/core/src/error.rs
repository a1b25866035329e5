use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("return map did not converge (residual {residual:e})")]
    ReturnMap { residual: f64 },

    #[error("Newton failed at step {step} after {iterations} iterations; residual history {history:?}")]
    Newton { step: usize, iterations: usize, history: Vec<f64> },

    #[error("line search failed at step {step}: objective increased from {before:e} to {after:e}")]
    EnergyIncrease { step: usize, before: f64, after: f64 },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("search boundary reached at {at:?} with radius {radius}")]
    BoundaryTouch { at: [f64; 3], radius: f64 },

    #[error("oracle iteration cap {0} exceeded (gradient norm {1:e})")]
    OracleCap(usize, f64),

    #[error("validation failed [{rule}] at {location}: {message}")]
    Validation { rule: String, location: String, message: String },

    #[error("probe: {0}")]
    Probe(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(rule: &str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { rule: rule.to_string(), location: location.into(), message: message.into() }
    }

    /// Whether the error comes from bad input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Validation { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::ShapeMismatch { .. }
                | Error::Probe(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
