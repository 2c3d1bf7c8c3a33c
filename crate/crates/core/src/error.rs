use thiserror::Error;

use crate::audio::AudioError;
use crate::dataset::DatasetError;
use crate::dsp::DspError;
use crate::eval::EvalError;
use crate::nn::NnError;
use crate::spectrogram::SpectrogramError;
use crate::train::TrainError;

/// Any failure raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Spectrogram(#[from] SpectrogramError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Audio(_) => "audio",
            Error::Dsp(_) => "dsp",
            Error::Spectrogram(_) => "spectrogram",
            Error::Dataset(_) => "dataset",
            Error::Nn(_) => "model",
            Error::Train(_) => "training",
            Error::Eval(_) => "evaluation",
            Error::Io(_) => "io",
        }
    }
}
