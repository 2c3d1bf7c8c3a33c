//! Noise recordings with embedded chirps at known positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{synthesize, DspError, SignalKind, SynthSpec};
use crate::audio::AudioClip;
use crate::dataset::{Annotation, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub n_chirps: usize,
    pub f0_hz: f64,
    pub f1_hz: f64,
    pub min_chirp_s: f64,
    pub max_chirp_s: f64,
    /// Chirp power over the white-noise power inside the swept band,
    /// `σ²·|f1 − f0| / (fs/2)`.
    pub snr_db: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            sample_rate: 96_000,
            n_chirps: 20,
            f0_hz: 5_000.0,
            f1_hz: 15_000.0,
            min_chirp_s: 0.14,
            max_chirp_s: 0.78,
            snr_db: 10.0,
            noise_std: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub clip: AudioClip,
    /// One whistle annotation per chirp, in time order.
    pub whistles: Vec<Annotation>,
}

/// Chirp amplitude giving the requested in-band SNR over white noise.
pub fn chirp_amplitude(noise_std: f64, f0_hz: f64, f1_hz: f64, sample_rate: u32, snr_db: f64) -> f64 {
    let band_noise = noise_std * noise_std * (f1_hz - f0_hz).abs() / (sample_rate as f64 / 2.0);
    (2.0 * band_noise * 10f64.powf(snr_db / 10.0)).sqrt()
}

/// White noise with `n_chirps` linear chirps. The clip is cut into equal
/// slots and each chirp lands at a random offset inside its own slot, at
/// least 0.1 s from the slot edges, so chirps never overlap.
pub fn synthesize_scene(spec: &SceneSpec, file_id: &str) -> Result<Scene, DspError> {
    if spec.n_chirps == 0 || !(spec.min_chirp_s > 0.0 && spec.min_chirp_s <= spec.max_chirp_s) {
        return Err(DspError::InvalidSynth("need at least one chirp and 0 < min_chirp_s ≤ max_chirp_s".into()));
    }
    let slot = spec.duration_s / spec.n_chirps as f64;
    if slot < spec.max_chirp_s + 0.2 {
        return Err(DspError::InvalidSynth(format!("{} chirps do not fit in {} s", spec.n_chirps, spec.duration_s)));
    }
    let noise = synthesize(&SynthSpec {
        kind: SignalKind::WhiteNoise,
        f0_hz: 0.0,
        f1_hz: 0.0,
        amplitude: spec.noise_std,
        duration_s: spec.duration_s,
        sample_rate: spec.sample_rate,
        seed: spec.seed,
    })?;
    let fs = spec.sample_rate as f64;
    let amplitude = chirp_amplitude(spec.noise_std, spec.f0_hz, spec.f1_hz, spec.sample_rate, spec.snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5CE7_E5CE_7E5C_E7E5);
    let mut x = noise.channel(0).to_vec();
    let mut whistles = Vec::with_capacity(spec.n_chirps);
    for i in 0..spec.n_chirps {
        let dur = rng.random_range(spec.min_chirp_s..=spec.max_chirp_s);
        let start = i as f64 * slot + 0.1 + rng.random_range(0.0..=(slot - dur - 0.2));
        let offset = (start * fs).round() as usize;
        let chirp = synthesize(&SynthSpec {
            kind: SignalKind::LinearChirp,
            f0_hz: spec.f0_hz,
            f1_hz: spec.f1_hz,
            amplitude,
            duration_s: dur,
            sample_rate: spec.sample_rate,
            seed: 0,
        })?;
        for (dst, v) in x[offset..].iter_mut().zip(chirp.channel(0)) {
            *dst += v;
        }
        let start_s = offset as f64 / fs;
        whistles.push(Annotation::new(file_id, start_s, start_s + chirp.len() as f64 / fs, Label::Whistle));
    }
    let clip = AudioClip::mono(x, spec.sample_rate, file_id)?;
    Ok(Scene { clip, whistles })
}
