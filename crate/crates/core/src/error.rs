use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid perturbation: {reason} (cells: {cells:?})")]
    InvalidPerturbation { reason: String, cells: Vec<usize> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("macro packing failed after {attempts} attempts")]
    MacroPacking { attempts: usize },

    #[error("malformed tensor file: {0}")]
    MalformedTensor(String),

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
