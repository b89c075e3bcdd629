use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("non-integrable kernel: {0}")]
    NonIntegrable(String),
    #[error("inadmissible parameters: {condition} violated ({detail})")]
    Inadmissible { condition: String, detail: String },
    #[error("resource: memory depth {required} exceeds cap {cap}")]
    Resource { required: usize, cap: usize },
    #[error("stability: effective matrix not positive definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    Stability { min_eigenvalue: f64 },
    #[error("divergence at step {step}: {reason} (max norm {max_norm:.6e})")]
    Divergence {
        step: usize,
        max_norm: f64,
        reason: String,
    },
    #[error("energy identity violated at step {step}: predicted {predicted:.17e}, observed {observed:.17e}, tol {tol:.3e}")]
    IdentityViolation {
        step: usize,
        predicted: f64,
        observed: f64,
        tol: f64,
    },
    #[error("insufficient data: {available} usable samples, need {required}")]
    InsufficientData { available: usize, required: usize },
    #[error("numerical: {0}")]
    Numerical(String),
}
