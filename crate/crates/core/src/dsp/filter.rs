//! Butterworth band-pass design as cascaded biquads, and zero-phase filtering.
//!
//! The analog low-pass prototype of order N has poles on the unit circle at
//! `exp(jπ(2k+N+1)/(2N))`. The low-pass to band-pass substitution
//! `s → (s² + ω0²)/(B·s)` turns each prototype pole into a pair of band-pass
//! poles, and the bilinear transform with pre-warped edges maps them to the
//! z-plane. Every band-pass section has one zero at DC and one at Nyquist.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::DspError;
use crate::audio::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    #[default]
    ButterworthBandpass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    /// Prototype order; the band-pass has `order` second-order sections.
    pub order: usize,
    #[serde(default)]
    pub kind: FilterKind,
}

impl Default for FilterSpec {
    /// 5–20 kHz, order 4.
    fn default() -> Self {
        Self {
            low_cut_hz: 5_000.0,
            high_cut_hz: 20_000.0,
            order: 4,
            kind: FilterKind::ButterworthBandpass,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<(), DspError> {
        let nyquist = sample_rate / 2.0;
        if self.order == 0 {
            return Err(DspError::InvalidFilter("order must be positive".into()));
        }
        if !(self.low_cut_hz > 0.0 && self.low_cut_hz < self.high_cut_hz) {
            return Err(DspError::InvalidFilter(format!(
                "need 0 < low_cut ({}) < high_cut ({})",
                self.low_cut_hz, self.high_cut_hz
            )));
        }
        if self.high_cut_hz >= nyquist {
            return Err(DspError::InvalidFilter(format!(
                "cut-off {} Hz at or above Nyquist {nyquist} Hz",
                self.high_cut_hz
            )));
        }
        Ok(())
    }
}

/// Direct-form coefficients with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        let (a1, a2) = (self.a[1] / self.a[0], self.a[2] / self.a[0]);
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    /// Transposed direct form II state for a constant input `u` in steady state.
    fn steady_state(&self, u: f64) -> ([f64; 2], f64) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let y = (b0 + b1 + b2) / (1.0 + a1 + a2) * u;
        let s2 = b2 * u - a2 * y;
        let s1 = b1 * u - a1 * y + s2;
        ([s1, s2], y)
    }

    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + state[0];
            state[0] = b1 * input - a1 * y + state[1];
            state[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Cascade of second-order sections designed for a given sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sample_rate: f64,
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Causal filtering from a zero state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    fn filter_steady(&self, x: &mut [f64]) {
        let mut u = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let (state, y0) = s.steady_state(u);
            s.run(x, state);
            u = y0;
        }
    }
}

/// Designs a Butterworth band-pass as `spec.order` biquads.
///
/// Each section is scaled to unit gain at the digital centre frequency, so the
/// cascade has 0 dB at the centre and −3 dB at both cut-offs.
pub fn design_bandpass(spec: &FilterSpec, sample_rate: f64) -> Result<SosFilter, DspError> {
    spec.validate(sample_rate)?;
    let n = spec.order;
    let k = 2.0 * sample_rate;
    let warp = |f: f64| k * (PI * f / sample_rate).tan();
    let (wl, wh) = (warp(spec.low_cut_hz), warp(spec.high_cut_hz));
    let bw = wh - wl;
    let w0_sq = wl * wh;
    let w0 = w0_sq.sqrt();
    let z_centre_inv = Complex64::from_polar(1.0, -2.0 * (w0 / k).atan());
    let bilinear = |s: Complex64| (k + s) / (k - s);

    let mut sections = Vec::with_capacity(n);
    let mut push_pair = |z1: Complex64, z2: Complex64| {
        let mut bq = Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(z1 + z2).re, (z1 * z2).re],
        };
        let g = 1.0 / bq.response(z_centre_inv).norm();
        bq.b = [g, 0.0, -g];
        sections.push(bq);
    };
    for i in 0..n {
        let p = Complex64::from_polar(1.0, PI * (2 * i + n + 1) as f64 / (2 * n) as f64);
        // roots of s² − p·B·s + ω0² = 0
        let disc = (p * p * bw * bw - 4.0 * w0_sq).sqrt();
        let r1 = (p * bw + disc) / 2.0;
        let r2 = (p * bw - disc) / 2.0;
        if p.im > 1e-12 {
            // the conjugate prototype pole yields the conjugates of r1, r2
            push_pair(bilinear(r1), bilinear(r1.conj()));
            push_pair(bilinear(r2), bilinear(r2.conj()));
        } else if p.im.abs() <= 1e-12 {
            push_pair(bilinear(r1), bilinear(r2));
        }
    }
    let filter = SosFilter { sample_rate, sections };
    debug_assert_eq!(filter.sections.len(), n);
    Ok(filter)
}

/// Forward-backward filtering with odd extension at both ends and
/// steady-state initial conditions; zero phase, squared magnitude response.
pub fn apply_filter_zero_phase(clip: &AudioClip, filter: &SosFilter) -> Result<AudioClip, DspError> {
    if !filter.is_stable() {
        return Err(DspError::UnstableFilter);
    }
    let channels = clip
        .channels()
        .iter()
        .map(|c| filtfilt(filter, c))
        .collect();
    Ok(clip.with_channels(channels)?)
}

fn filtfilt(filter: &SosFilter, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let pad = (3 * (2 * filter.sections.len() + 1)).min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    filter.filter_steady(&mut ext);
    ext.reverse();
    filter.filter_steady(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
