use std::process::ExitCode;

use mlicl_core::corpus::CorpusError;
use mlicl_core::inference::InferenceError;
use mlicl_core::neuron::NeuronError;
use mlicl_core::prompt::PromptError;
use mlicl_core::sampling::SamplingError;
use mlicl_core::scoring::ScoringError;
use mlicl_core::stats::StatsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config.
    #[error("{0}")]
    Usage(String),
    /// Missing or malformed inputs.
    #[error("{0}")]
    Data(String),
    /// The model endpoint failed.
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        })
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(CorpusError, NeuronError, PromptError, SamplingError, ScoringError, StatsError);

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
