use thiserror::Error;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model is not valid: {0}")]
    InvalidModel(String),
    #[error("envelope is not valid: {0}")]
    InvalidEnvelope(String),
    #[error("field specification is not valid: {0}")]
    InvalidField(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("invariant breached: {0}")]
    Invariant(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, FockError>;
