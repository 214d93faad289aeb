use thiserror::Error;

/// Errors surfaced by the simulation and verification layers.
#[derive(Debug, Error)]
pub enum EngineError {
    /// Invalid user-supplied parameter or grid mismatch.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation not defined for the given input kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A splice level was not reached within the extension budget.
    /// Reported to the caller, never silently truncated.
    #[error("extension budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Report files could not be written.
    #[error("output error: {0}")]
    Output(String),
}

impl EngineError {
    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(msg.into())
    }
}
