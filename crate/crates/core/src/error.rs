use thiserror::Error;
use uavnav_tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("replay buffer holds {have} transitions, need {need}")]
    BufferUnderfilled { have: usize, need: usize },
    #[error("numerical abort: {0}")]
    NumericalAbort(String),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
