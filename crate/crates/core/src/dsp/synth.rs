//! Deterministic test-signal generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::DspError;
use crate::audio::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Sine,
    LinearChirp,
    WhiteNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SignalKind,
    pub f0_hz: f64,
    /// End frequency of a chirp; ignored otherwise.
    pub f1_hz: f64,
    /// Peak amplitude for tones, standard deviation for noise.
    pub amplitude: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

/// Phase of a linear chirp sweeping `f0 → f1` over `duration`, at time `t`.
pub fn chirp_phase(f0: f64, f1: f64, duration: f64, t: f64) -> f64 {
    2.0 * PI * (f0 * t + 0.5 * (f1 - f0) / duration * t * t)
}

pub fn synthesize(spec: &SynthSpec) -> Result<AudioClip, DspError> {
    let fs = spec.sample_rate as f64;
    let nyquist = fs / 2.0;
    if spec.sample_rate == 0 || !(spec.duration_s > 0.0) {
        return Err(DspError::InvalidSynth("need positive sample rate and duration".into()));
    }
    let n = (spec.duration_s * fs).round() as usize;
    if n == 0 {
        return Err(DspError::InvalidSynth("duration shorter than one sample".into()));
    }
    let check = |f: f64| {
        if f < 0.0 || f >= nyquist {
            Err(DspError::InvalidSynth(format!("{f} Hz outside [0, {nyquist}) Hz")))
        } else {
            Ok(())
        }
    };
    let samples: Vec<f64> = match spec.kind {
        SignalKind::Sine => {
            check(spec.f0_hz)?;
            (0..n).map(|i| spec.amplitude * (2.0 * PI * spec.f0_hz * i as f64 / fs).sin()).collect()
        }
        SignalKind::LinearChirp => {
            check(spec.f0_hz)?;
            check(spec.f1_hz)?;
            (0..n)
                .map(|i| spec.amplitude * chirp_phase(spec.f0_hz, spec.f1_hz, spec.duration_s, i as f64 / fs).sin())
                .collect()
        }
        SignalKind::WhiteNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let normal = Normal::new(0.0, spec.amplitude.abs())
                .map_err(|e| DspError::InvalidSynth(e.to_string()))?;
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        }
    };
    let id = format!("synth-{:?}-{}", spec.kind, spec.seed).to_lowercase();
    Ok(AudioClip::mono(samples, spec.sample_rate, id)?)
}
