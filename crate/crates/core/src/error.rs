use thiserror::Error;

use crate::dsp::DspError;
use crate::eval::EvalError;
use crate::labels::LabelError;
use crate::model_format::ModelFormatError;
use crate::nn::NnError;
use crate::wfdb::WfdbError;

/// Crate-wide error for callers that chain several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Wfdb(#[from] WfdbError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    ModelFormat(#[from] ModelFormatError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
