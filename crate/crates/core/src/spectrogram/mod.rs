//! Short-time Fourier spectrograms and the grayscale images fed to the models.

mod image;
mod stft;

pub use self::image::{gray_levels, render_to_image, resize_bilinear, write_png, GrayImage, SpectroImage, MODEL_INPUT_SIZE};
pub use self::stft::{
    blackman_window, crop_frequency, hann_window, power_to_db, slide_windows, stft, PowerScale, Spectrogram,
    StftParams, WindowKind,
};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum SpectrogramError {
    #[error("signal of {got} samples is shorter than one {window_len}-sample window")]
    TooShort { got: usize, window_len: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("frequency crop [{lo_khz}, {hi_khz}] kHz selects no bins")]
    EmptyCrop { lo_khz: f64, hi_khz: f64 },
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
}
