//! Band-pass filtering, spectral whitening and test-signal synthesis.

mod filter;
mod scene;
mod synth;
mod whitening;

pub use filter::{apply_filter_zero_phase, design_bandpass, Biquad, FilterKind, FilterSpec, SosFilter};
pub use scene::{chirp_amplitude, synthesize_scene, Scene, SceneSpec};
pub use synth::{chirp_phase, synthesize, SignalKind, SynthSpec};
pub use whitening::{apply_whitening, average_magnitude_spectrum, estimate_whitening, WhiteningCurve, WhiteningParams};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("filter has poles on or outside the unit circle")]
    UnstableFilter,
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid whitening curve: {0}")]
    InvalidCurve(String),
    #[error("invalid synthesis request: {0}")]
    InvalidSynth(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}
