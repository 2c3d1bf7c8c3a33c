use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SpectrogramError;
use crate::audio::AudioClip;
use crate::fft::RealFft;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Blackman,
    Hann,
    Rectangular,
}

/// Blackman window `0.42 − 0.5·cos(2πk/D) + 0.08·cos(4πk/D)` with `D = n`
/// (periodic) or `D = n − 1` (symmetric).
pub fn blackman_window(n: usize, periodic: bool) -> Vec<f64> {
    assert!(n >= 2, "window needs at least two points");
    let d = if periodic { n } else { n - 1 } as f64;
    (0..n)
        .map(|k| {
            let x = k as f64 / d;
            0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
        })
        .collect()
}

pub fn hann_window(n: usize, periodic: bool) -> Vec<f64> {
    assert!(n >= 2, "window needs at least two points");
    let d = if periodic { n } else { n - 1 } as f64;
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / d).cos()).collect()
}

impl WindowKind {
    pub fn weights(self, n: usize, periodic: bool) -> Vec<f64> {
        match self {
            WindowKind::Blackman => blackman_window(n, periodic),
            WindowKind::Hann => hann_window(n, periodic),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub periodic: bool,
}

impl Default for StftParams {
    /// 2048-point periodic Blackman window advancing by `floor(0.8 · 2048) = 1638` samples.
    fn default() -> Self {
        Self::with_hop_fraction(2048, 0.8)
    }
}

impl StftParams {
    /// Periodic Blackman window advancing by `floor(fraction · window_len)`.
    pub fn with_hop_fraction(window_len: usize, fraction: f64) -> Self {
        Self {
            window_len,
            hop: ((window_len as f64 * fraction).floor() as usize).max(1),
            window: WindowKind::Blackman,
            periodic: true,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// `1 + floor((n − window_len) / hop)`, or 0 when the signal is shorter than a window.
    pub fn n_frames(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            1 + (n - self.window_len) / self.hop
        }
    }

    fn validate(&self) -> Result<(), SpectrogramError> {
        if self.window_len < 2 || self.hop == 0 {
            return Err(SpectrogramError::InvalidParams(format!(
                "window_len {} / hop {}",
                self.window_len, self.hop
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerScale {
    Linear,
    Decibel,
}

/// Time × frequency matrix, stored row-major with one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    /// Frame-centre times in seconds from the clip start.
    pub time_axis_s: Vec<f64>,
    pub freq_axis_khz: Vec<f64>,
    pub params: StftParams,
    pub scale: PowerScale,
}

impl Spectrogram {
    pub fn at(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.n_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    /// Seconds between consecutive frames.
    pub fn frame_step_s(&self) -> f64 {
        if self.time_axis_s.len() >= 2 {
            self.time_axis_s[1] - self.time_axis_s[0]
        } else {
            0.0
        }
    }

    pub fn bin_width_khz(&self) -> f64 {
        if self.freq_axis_khz.len() >= 2 {
            self.freq_axis_khz[1] - self.freq_axis_khz[0]
        } else {
            0.0
        }
    }

    /// CSV with a `time_s` column followed by one column per frequency bin (kHz).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "time_s")?;
        for f in &self.freq_axis_khz {
            write!(out, ",{f}")?;
        }
        writeln!(out)?;
        for (i, t) in self.time_axis_s.iter().enumerate() {
            write!(out, "{t}")?;
            for v in self.frame(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Short-time power spectrum `|X[k]|²` of a mono clip.
///
/// Frame `f` covers samples `[f·hop, f·hop + window_len)`; its time stamp is
/// `(f·hop + window_len/2) / fs`.
pub fn stft(clip: &AudioClip, params: &StftParams) -> Result<Spectrogram, SpectrogramError> {
    params.validate()?;
    let x = clip.mono_samples()?;
    let n_frames = params.n_frames(x.len());
    if n_frames == 0 {
        return Err(SpectrogramError::TooShort {
            got: x.len(),
            window_len: params.window_len,
        });
    }
    let fs = clip.sample_rate() as f64;
    let window = params.window.weights(params.window_len, params.periodic);
    let fft = RealFft::new(params.window_len);
    let n_bins = params.n_bins();
    let mut values = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![0.0; params.window_len];
    for f in 0..n_frames {
        let seg = &x[f * params.hop..f * params.hop + params.window_len];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = s * w;
        }
        values.extend(fft.forward(&buf).iter().map(|c| c.norm_sqr()));
    }
    let time_axis_s = (0..n_frames)
        .map(|f| (f * params.hop) as f64 / fs + params.window_len as f64 / (2.0 * fs))
        .collect();
    let freq_axis_khz = (0..n_bins)
        .map(|k| k as f64 * fs / params.window_len as f64 / 1000.0)
        .collect();
    Ok(Spectrogram {
        values,
        n_frames,
        n_bins,
        time_axis_s,
        freq_axis_khz,
        params: *params,
        scale: PowerScale::Linear,
    })
}

/// `10·log10(p)`, clamped below at `floor_db` (zero power maps to the floor).
pub fn power_to_db(spec: &Spectrogram, floor_db: f64) -> Spectrogram {
    let values = spec
        .values
        .iter()
        .map(|&p| if p > 0.0 { (10.0 * p.log10()).max(floor_db) } else { floor_db })
        .collect();
    Spectrogram {
        values,
        scale: PowerScale::Decibel,
        ..spec.clone()
    }
}

/// Keeps the bins with `lo ≤ f ≤ hi` (kHz).
pub fn crop_frequency(spec: &Spectrogram, lo_khz: f64, hi_khz: f64) -> Result<Spectrogram, SpectrogramError> {
    // bin centres are exact multiples of fs/N; allow for rounding in the kHz conversion
    let tol = 1e-9;
    let keep: Vec<usize> = (0..spec.n_bins)
        .filter(|&k| spec.freq_axis_khz[k] >= lo_khz - tol && spec.freq_axis_khz[k] <= hi_khz + tol)
        .collect();
    if lo_khz >= hi_khz || keep.is_empty() {
        return Err(SpectrogramError::EmptyCrop { lo_khz, hi_khz });
    }
    let (first, last) = (keep[0], *keep.last().unwrap());
    let n_bins = last - first + 1;
    let mut values = Vec::with_capacity(spec.n_frames * n_bins);
    for f in 0..spec.n_frames {
        values.extend_from_slice(&spec.frame(f)[first..=last]);
    }
    Ok(Spectrogram {
        values,
        n_bins,
        freq_axis_khz: spec.freq_axis_khz[first..=last].to_vec(),
        ..spec.clone()
    })
}

/// Consecutive windows of `window_dur_s` starting every `shift_s`, each fully
/// inside the clip. Returns `(segment, start_s)` pairs; empty for short clips.
pub fn slide_windows(clip: &AudioClip, window_dur_s: f64, shift_s: f64) -> Vec<(AudioClip, f64)> {
    let fs = clip.sample_rate() as f64;
    let w = (window_dur_s * fs).round() as usize;
    let s = (shift_s * fs).round() as usize;
    if w == 0 || s == 0 || clip.len() < w {
        return Vec::new();
    }
    let count = 1 + (clip.len() - w) / s;
    (0..count)
        .map(|i| {
            let start = i * s;
            let seg = clip.slice(start, start + w).expect("window inside clip");
            (seg, start as f64 / fs)
        })
        .collect()
}
