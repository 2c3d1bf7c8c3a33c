//! Dolphin whistle detection toolkit.
//!
//! The crate covers the whole chain from recorded audio to evaluation
//! reports: quality assurance of raw recordings, band-limiting and whitening,
//! spectrogram images, a small CNN engine trained from scratch, a
//! connected-region baseline detector, and the metrics used to compare them.

pub mod audio;
pub mod baseline;
pub mod nn;
pub mod dataset;
pub mod dsp;
pub mod eval;
mod error;
mod fft;
pub mod pipeline;
pub mod spectrogram;
pub mod train;

pub use error::Error;

/// Library version, recorded in run records and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
