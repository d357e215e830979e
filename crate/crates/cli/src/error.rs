use thiserror::Error;

use trllm_core::dataset::DatasetError;
use trllm_core::eval::EvalError;
use trllm_core::goal::{PredictError, WeightsError};
use trllm_core::llm::LlmError;
use trllm_core::scene::SceneError;
use trllm_core::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Transport(_) => 4,
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Config(_) => CliError::Usage(e.to_string()),
            LlmError::Precondition(_) => CliError::Data(e.to_string()),
            LlmError::Transport { .. } | LlmError::Protocol(_) | LlmError::Request { .. } => {
                CliError::Transport(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Llm(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(DatasetError, PredictError, WeightsError, SceneError, TrajectoryError);
