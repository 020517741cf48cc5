use nwa_core::datagen::DatagenError;
use nwa_core::evalkit::EvalError;
use nwa_core::pipeline::PipelineError;
use std::path::Path;
use thiserror::Error;

/// Failures sorted by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, values or paths given by the caller.
    #[error("{0}")]
    Usage(String),
    /// Missing, corrupt or mismatched data or checkpoints.
    #[error("{0}")]
    Data(String),
    /// Non-finite values during training.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Config(_) | DatagenError::ImpossibleMargin { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) | PipelineError::UnknownVariant(_) | PipelineError::NegativeEpsilon(_) => CliError::Usage(e.to_string()),
            PipelineError::Grid(_) | PipelineError::Search(_) => CliError::Usage(e.to_string()),
            PipelineError::Divergent { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pipeline(p) => p.into(),
            EvalError::EpsList(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
