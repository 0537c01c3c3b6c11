//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    /// A parameter violated its domain invariant. `field` is the offending
    /// field name so config loaders can report a full path.
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    /// The integrator produced a non-finite state or was asked to start from
    /// one. Carries the last good time in seconds.
    #[error("integration failed at t = {t:.6e} s: {message}")]
    IntegrationFailure { t: f64, message: String },

    /// A step-size guard was violated (`dt * rate > guard`).
    #[error("step guard violated at t = {t:.6e} s: dt*{rate_name} = {product:.3e} exceeds {guard:.3e}")]
    StepGuard {
        t: f64,
        rate_name: &'static str,
        product: f64,
        guard: f64,
    },

    /// The covariance matrix dropped below the Heisenberg bound beyond the
    /// allowed tolerance.
    #[error("unphysical covariance at t = {t:.6e} s: nu_minus = {nu_minus:.9}")]
    Physicality { t: f64, nu_minus: f64 },

    /// A symplectic/negativity radicand went negative beyond roundoff,
    /// signalling a corrupted covariance matrix.
    #[error("corrupted covariance matrix: {message}")]
    CorruptCovariance { message: String },

    /// Trajectory analysis could not be carried out as requested.
    #[error("analysis error: {0}")]
    Analysis(String),
}

impl SimError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
