use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (bad probability, unknown item, shape mismatch).
    #[error("input error: {0}")]
    Input(String),

    /// The requested estimation method is not available for this mechanism.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    /// The welfare optimizer hit its iteration cap.
    #[error("optimizer did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { residual: f64, iterations: usize },

    /// A utility was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
