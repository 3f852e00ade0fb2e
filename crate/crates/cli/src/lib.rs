//! Pipeline subcommands behind the `ecglite` binary.

pub mod cache;
pub mod commands;
pub mod config;
pub mod manifest;

use std::path::Path;

/// Maps onto the process exit status: usage and config problems are 2,
/// everything that goes wrong while running the pipeline is 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Pipeline(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Pipeline(format!("{}: {e}", path.display()))
    }
}

impl From<ecglite::Error> for CliError {
    fn from(e: ecglite::Error) -> Self {
        CliError::Pipeline(e.to_string())
    }
}

macro_rules! pipeline_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Pipeline(e.to_string())
            }
        }
    )*};
}

pipeline_from!(
    ecglite::wfdb::WfdbError,
    ecglite::dsp::DspError,
    ecglite::labels::LabelError,
    ecglite::nn::NnError,
    ecglite::model_format::ModelFormatError,
    ecglite::eval::EvalError
);
