use thiserror::Error;

/// Errors surfaced by the engine and its supporting modules.
#[derive(Debug, Error)]
pub enum DfsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    TrainingDiverged { epoch: usize, step: usize, loss: f64 },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DfsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DfsError::InvalidArgument(msg.into()))
}
