//! Audio clips, WAV decoding and recording quality assurance.
//!
//! Samples are held as `f64` per channel, scaled to the nominal `[-1, 1]`
//! range by the full-scale integer of the source bit depth.

mod qa;
mod wav;
pub mod wavelet;

pub use qa::{
    average_channels, denoise_transients, denoise_transients_flagged, detect_bias, detect_cutoffs,
    remove_dc_bias, write_flags_jsonl, CutoffParams, DenoiseParams, QaFlag, QaKind,
};
pub use wav::{decode_audio, decode_wav_bytes, encode_wav_bytes, write_wav, BitDepth};
pub use wavelet::{ThresholdRule, Wavelet};

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated file at byte offset {offset}: {detail}")]
    Truncated { offset: u64, detail: String },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("clip of {len} samples is shorter than 2^{levels}")]
    TooShortForLevels { len: usize, levels: u32 },
}

/// Timestamped multi-channel PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
    start_time: DateTime<Utc>,
    source_id: String,
}

impl AudioClip {
    /// Builds a clip, checking that every channel has the same non-zero length.
    pub fn new(
        channels: Vec<Vec<f64>>,
        sample_rate: u32,
        start_time: DateTime<Utc>,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        let Some(first) = channels.first() else {
            return Err(AudioError::InvalidClip("clip has no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(AudioError::InvalidClip("clip has no samples".into()));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(AudioError::InvalidClip("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
            start_time,
            source_id: source_id.into(),
        })
    }

    /// Mono clip starting at the Unix epoch; handy for synthesized signals.
    pub fn mono(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self, AudioError> {
        Self::new(vec![samples], sample_rate, DateTime::UNIX_EPOCH, source_id)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of sample frames (per-channel length).
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    /// Always false: a clip holds at least one frame.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Samples of a mono clip. Fails on multi-channel input.
    pub fn mono_samples(&self) -> Result<&[f64], AudioError> {
        if self.channels.len() != 1 {
            return Err(AudioError::InvalidClip(format!(
                "expected mono clip, got {} channels",
                self.channels.len()
            )));
        }
        Ok(&self.channels[0])
    }

    /// Replaces the sample data, keeping rate, timestamp and id.
    pub fn with_channels(&self, channels: Vec<Vec<f64>>) -> Result<Self, AudioError> {
        Self::new(channels, self.sample_rate, self.start_time, self.source_id.clone())
    }

    pub fn with_start_time(mut self, start_time: DateTime<Utc>) -> Self {
        self.start_time = start_time;
        self
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Sub-clip of frames `[start, end)`; the timestamp is shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, AudioError> {
        if start >= end || end > self.len() {
            return Err(AudioError::InvalidClip(format!(
                "slice [{start}, {end}) out of range for {} samples",
                self.len()
            )));
        }
        let offset_ns = (start as f64 / self.sample_rate as f64 * 1e9).round() as i64;
        let channels = self.channels.iter().map(|c| c[start..end].to_vec()).collect();
        Ok(Self {
            channels,
            sample_rate: self.sample_rate,
            start_time: self.start_time + chrono::Duration::nanoseconds(offset_ns),
            source_id: self.source_id.clone(),
        })
    }

    /// Largest absolute sample value over all channels.
    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    /// Sum of squared samples over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flat_map(|c| c.iter()).map(|x| x * x).sum()
    }
}
