//! Spectral whitening: per-frequency gains that flatten the average spectrum.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::audio::AudioClip;
use crate::fft::RealFft;

/// Multiplicative gains on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningCurve {
    pub bin_freqs_hz: Vec<f64>,
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteningParams {
    /// Half the analysis frame length; the curve has `n_bins + 1` points
    /// spanning DC to Nyquist.
    pub n_bins: usize,
    /// Width of the centred moving average applied to the magnitude spectrum.
    pub smoothing_bins: usize,
    /// Lowest spectrum level considered, as a fraction of the peak; caps the
    /// gain range at `1/floor`.
    pub floor: f64,
    /// Band over which the mean gain is normalized to 1; whole axis when absent.
    #[serde(default)]
    pub band_hz: Option<(f64, f64)>,
}

impl Default for WhiteningParams {
    fn default() -> Self {
        Self {
            n_bins: 512,
            smoothing_bins: 9,
            floor: 0.01,
            band_hz: Some((5_000.0, 20_000.0)),
        }
    }
}

impl WhiteningCurve {
    pub fn identity(sample_rate: f64, n_bins: usize) -> Self {
        let bin_freqs_hz = (0..=n_bins).map(|k| k as f64 * sample_rate / (2 * n_bins) as f64).collect();
        Self {
            bin_freqs_hz,
            gains: vec![1.0; n_bins + 1],
        }
    }

    fn validate(&self) -> Result<(), DspError> {
        if self.gains.len() != self.bin_freqs_hz.len() || self.gains.len() < 2 {
            return Err(DspError::InvalidCurve("need matching freq/gain columns with ≥ 2 rows".into()));
        }
        if self.gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(DspError::InvalidCurve("gains must be positive and finite".into()));
        }
        if self.bin_freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DspError::InvalidCurve("frequencies must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Linear interpolation on the frequency grid.
    pub fn gain_at(&self, freq_hz: f64) -> f64 {
        let f = &self.bin_freqs_hz;
        let idx = f.partition_point(|&x| x < freq_hz);
        if idx == 0 {
            return self.gains[0];
        }
        if idx >= f.len() {
            return self.gains[f.len() - 1];
        }
        let t = (freq_hz - f[idx - 1]) / (f[idx] - f[idx - 1]);
        self.gains[idx - 1] + t * (self.gains[idx] - self.gains[idx - 1])
    }

    /// `freq_hz,gain` CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "freq_hz,gain")?;
        for (f, g) in self.bin_freqs_hz.iter().zip(&self.gains) {
            writeln!(out, "{f},{g}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, DspError> {
        let mut bin_freqs_hz = Vec::new();
        let mut gains = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| DspError::InvalidCurve(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("freq_hz")) {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64, DspError> {
                cols.next()
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| DspError::InvalidCurve(format!("line {}: expected freq_hz,gain", lineno + 1)))
            };
            bin_freqs_hz.push(next()?);
            gains.push(next()?);
        }
        let curve = Self { bin_freqs_hz, gains };
        curve.validate()?;
        Ok(curve)
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}

/// Welch-averaged magnitude spectrum (Hann, 50% overlap) of a mono signal.
pub fn average_magnitude_spectrum(x: &[f64], n_bins: usize) -> Result<Vec<f64>, DspError> {
    let frame = 2 * n_bins;
    let hop = n_bins;
    if n_bins == 0 || x.len() < frame || 1 + (x.len() - frame) / hop < 8 {
        return Err(DspError::TooShort {
            needed: frame + 7 * hop,
            got: x.len(),
        });
    }
    let n_frames = 1 + (x.len() - frame) / hop;
    let window = hann_periodic(frame);
    let fft = RealFft::new(frame);
    let mut power = vec![0.0; n_bins + 1];
    let mut buf = vec![0.0; frame];
    for f in 0..n_frames {
        let seg = &x[f * hop..f * hop + frame];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = s * w;
        }
        for (p, c) in power.iter_mut().zip(fft.forward(&buf)) {
            *p += c.norm_sqr();
        }
    }
    Ok(power.into_iter().map(|p| (p / n_frames as f64).sqrt()).collect())
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let half = width / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Estimates whitening gains from the clip's own smoothed spectrum:
/// `gain = 1 / max(S, floor·peak(S))`, rescaled so the mean gain over the
/// normalization band is 1.
pub fn estimate_whitening(clip: &AudioClip, params: &WhiteningParams) -> Result<WhiteningCurve, DspError> {
    let x = clip.mono_samples()?;
    let spectrum = average_magnitude_spectrum(x, params.n_bins)?;
    let smooth = moving_average(&spectrum, params.smoothing_bins);
    let peak = smooth.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(WhiteningCurve::identity(clip.sample_rate() as f64, params.n_bins));
    }
    let floor = params.floor * peak;
    let mut gains: Vec<f64> = smooth.iter().map(|&s| peak / s.max(floor)).collect();
    let fs = clip.sample_rate() as f64;
    let bin_freqs_hz: Vec<f64> = (0..=params.n_bins).map(|k| k as f64 * fs / (2 * params.n_bins) as f64).collect();
    let in_band: Vec<f64> = bin_freqs_hz
        .iter()
        .zip(&gains)
        .filter(|(f, _)| params.band_hz.is_none_or(|(lo, hi)| **f >= lo && **f <= hi))
        .map(|(_, g)| *g)
        .collect();
    let mean = if in_band.is_empty() {
        gains.iter().sum::<f64>() / gains.len() as f64
    } else {
        in_band.iter().sum::<f64>() / in_band.len() as f64
    };
    for g in &mut gains {
        *g /= mean;
    }
    Ok(WhiteningCurve { bin_freqs_hz, gains })
}

/// Applies a whitening curve by overlap-add: Hann-windowed frames at 50%
/// overlap (which sum to one), each spectrum multiplied by the curve.
pub fn apply_whitening(clip: &AudioClip, curve: &WhiteningCurve) -> Result<AudioClip, DspError> {
    curve.validate()?;
    let fs = clip.sample_rate() as f64;
    let nyquist = fs / 2.0;
    let span_ok = curve.bin_freqs_hz[0] <= 1e-9 * nyquist
        && *curve.bin_freqs_hz.last().unwrap() >= nyquist * (1.0 - 1e-9);
    if !span_ok {
        return Err(DspError::InvalidCurve(format!("curve does not span 0..{nyquist} Hz")));
    }
    let frame = (2 * (curve.gains.len() - 1)).max(2);
    let hop = frame / 2;
    let fft = RealFft::new(frame);
    let gains: Vec<f64> = (0..=frame / 2).map(|k| curve.gain_at(k as f64 * fs / frame as f64)).collect();
    let window = hann_periodic(frame);

    let channels = clip
        .channels()
        .iter()
        .map(|x| {
            let n = x.len();
            let mut padded = vec![0.0; hop];
            padded.extend_from_slice(x);
            let n_frames = (n + hop).div_ceil(hop);
            padded.resize(n_frames * hop + frame, 0.0);
            let mut out = vec![0.0; padded.len()];
            let mut buf = vec![0.0; frame];
            for f in 0..=n_frames {
                let start = f * hop;
                if start + frame > padded.len() {
                    break;
                }
                for ((b, &s), &w) in buf.iter_mut().zip(&padded[start..start + frame]).zip(&window) {
                    *b = s * w;
                }
                let spec: Vec<Complex64> = fft.forward(&buf).into_iter().zip(&gains).map(|(c, &g)| c * g).collect();
                for (o, v) in out[start..start + frame].iter_mut().zip(fft.inverse(&spec)) {
                    *o += v;
                }
            }
            out[hop..hop + n].to_vec()
        })
        .collect();
    Ok(clip.with_channels(channels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_curve_is_identity() {
        let x: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
        let clip = AudioClip::mono(x.clone(), 48_000, "c").unwrap();
        let out = apply_whitening(&clip, &WhiteningCurve::identity(48_000.0, 128)).unwrap();
        let err: f64 = x.iter().zip(out.channel(0)).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(err.sqrt() < 1e-9);
    }

    #[test]
    fn curve_must_span_nyquist() {
        let clip = AudioClip::mono(vec![0.0; 1000], 48_000, "c").unwrap();
        let mut curve = WhiteningCurve::identity(48_000.0, 64);
        curve.bin_freqs_hz.pop();
        curve.gains.pop();
        assert!(apply_whitening(&clip, &curve).is_err());
    }

    #[test]
    fn too_short_for_estimation() {
        let clip = AudioClip::mono(vec![0.1; 1000], 48_000, "c").unwrap();
        let params = WhiteningParams { n_bins: 256, ..WhiteningParams::default() };
        assert!(matches!(estimate_whitening(&clip, &params), Err(DspError::TooShort { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let curve = WhiteningCurve { bin_freqs_hz: vec![0.0, 100.5, 200.0], gains: vec![1.0, 0.5, 2.25] };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"freq_hz,gain\n"));
        assert_eq!(WhiteningCurve::read_csv(buf.as_slice()).unwrap(), curve);
    }

    #[test]
    fn csv_rejects_nonpositive_gain() {
        let text = "freq_hz,gain\n0,1\n10,0\n";
        assert!(WhiteningCurve::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn interpolated_gain() {
        let curve = WhiteningCurve { bin_freqs_hz: vec![0.0, 10.0], gains: vec![1.0, 3.0] };
        assert_eq!(curve.gain_at(5.0), 2.0);
        assert_eq!(curve.gain_at(-1.0), 1.0);
        assert_eq!(curve.gain_at(20.0), 3.0);
    }
}
