use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular configuration: ions {0} and {1} coincide")]
    SingularConfiguration(usize, usize),

    #[error("ions {0} and {1} crossed at t = {2:e} s")]
    IonCrossing(usize, usize, f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("integration failed at t = {t:e} s: {reason} ({accepted} accepted, {rejected} rejected steps, h = {step:e})")]
    Integration {
        t: f64,
        step: f64,
        accepted: usize,
        rejected: usize,
        reason: &'static str,
    },

    #[error("trajectory design failed: {0}")]
    DesignFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::Io(_) | Error::Json(_)
        )
    }
}
