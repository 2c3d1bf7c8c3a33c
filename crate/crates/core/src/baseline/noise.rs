//! Noise-removal steps applied to dB spectrograms before thresholding.

use serde::{Deserialize, Serialize};

use crate::spectrogram::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "step")]
pub enum NoiseStep {
    /// Subtracts from each cell the median of its bin over the trailing
    /// `window_frames` frames (current frame included).
    MedianSubtractPerBin { window_frames: usize },
    /// Box average over `frames × bins` cells centred on each cell (both
    /// odd); edges average over the cells that exist.
    MovingAverageSmooth { frames: usize, bins: usize },
    /// Subtracts each frame's mean across bins.
    SpectralMeanNormalize,
}

pub fn default_noise_chain() -> Vec<NoiseStep> {
    vec![
        NoiseStep::MedianSubtractPerBin { window_frames: 40 },
        NoiseStep::MovingAverageSmooth { frames: 1, bins: 7 },
        NoiseStep::SpectralMeanNormalize,
    ]
}

fn median_of(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

fn median_subtract(values: &[f64], frames: usize, bins: usize, window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = vec![0.0; values.len()];
    let mut buf = Vec::with_capacity(window);
    for b in 0..bins {
        for f in 0..frames {
            buf.clear();
            buf.extend(((f + 1).saturating_sub(window)..=f).map(|g| values[g * bins + b]));
            out[f * bins + b] = values[f * bins + b] - median_of(&mut buf);
        }
    }
    out
}

fn box_smooth(values: &[f64], frames: usize, bins: usize, kf: usize, kb: usize) -> Vec<f64> {
    let (rf, rb) = (kf / 2, kb / 2);
    let mut out = vec![0.0; values.len()];
    for f in 0..frames {
        for b in 0..bins {
            let (mut sum, mut n) = (0.0, 0);
            for g in f.saturating_sub(rf)..(f + rf + 1).min(frames) {
                for c in b.saturating_sub(rb)..(b + rb + 1).min(bins) {
                    sum += values[g * bins + c];
                    n += 1;
                }
            }
            out[f * bins + b] = sum / n as f64;
        }
    }
    out
}

fn mean_normalize(values: &[f64], frames: usize, bins: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for row in out.chunks_mut(bins).take(frames) {
        let mean = row.iter().sum::<f64>() / bins as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// Applies the steps in order; the output has the input's shape and axes.
pub fn remove_noise(spec: &Spectrogram, chain: &[NoiseStep]) -> Spectrogram {
    let (frames, bins) = (spec.n_frames, spec.n_bins);
    let mut values = spec.values.clone();
    for step in chain {
        values = match *step {
            NoiseStep::MedianSubtractPerBin { window_frames } => median_subtract(&values, frames, bins, window_frames),
            NoiseStep::MovingAverageSmooth { frames: kf, bins: kb } => box_smooth(&values, frames, bins, kf, kb),
            NoiseStep::SpectralMeanNormalize => mean_normalize(&values, frames, bins),
        };
    }
    Spectrogram { values, ..spec.clone() }
}
