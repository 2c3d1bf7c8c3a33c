//! Channel averaging, DC bias removal, cut-off detection and transient denoising.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::wavelet::{self, ThresholdRule, Wavelet};
use super::{AudioClip, AudioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaKind {
    Cutoff,
    Bias,
    Transient,
}

/// A flagged interval of a clip, in seconds from the clip start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaFlag {
    pub kind: QaKind,
    pub start_s: f64,
    pub end_s: f64,
    pub magnitude: f64,
}

impl QaFlag {
    fn from_samples(kind: QaKind, start: usize, end_excl: usize, rate: u32, magnitude: f64) -> Self {
        Self {
            kind,
            start_s: start as f64 / rate as f64,
            end_s: end_excl as f64 / rate as f64,
            magnitude,
        }
    }

    pub fn overlaps(&self, start_s: f64, end_s: f64) -> bool {
        self.start_s < end_s && start_s < self.end_s
    }
}

/// Mean over channels, sample by sample.
pub fn average_channels(clip: &AudioClip) -> AudioClip {
    if clip.n_channels() == 1 {
        return clip.clone();
    }
    let n_ch = clip.n_channels() as f64;
    let mono = (0..clip.len())
        .map(|i| clip.channels().iter().map(|c| c[i]).sum::<f64>() / n_ch)
        .collect();
    clip.with_channels(vec![mono]).expect("length preserved")
}

/// Subtracts each channel's mean.
pub fn remove_dc_bias(clip: &AudioClip) -> AudioClip {
    let channels = clip
        .channels()
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    clip.with_channels(channels).expect("length preserved")
}

/// Flags the whole clip when any channel mean exceeds `tolerance` in magnitude.
pub fn detect_bias(clip: &AudioClip, tolerance: f64) -> Option<QaFlag> {
    let worst = clip
        .channels()
        .iter()
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64).abs())
        .fold(0.0, f64::max);
    (worst > tolerance).then(|| QaFlag::from_samples(QaKind::Bias, 0, clip.len(), clip.sample_rate(), worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffParams {
    /// Fraction of full scale at or above which a sample counts as saturated.
    pub saturation_threshold: f64,
    /// Minimum run length in samples.
    pub min_run: usize,
}

impl CutoffParams {
    /// Threshold 0.999 and a 10 ms minimum run.
    pub fn for_rate(sample_rate: u32) -> Self {
        Self {
            saturation_threshold: 0.999,
            min_run: (sample_rate as usize / 100).max(1),
        }
    }
}

/// Maximal runs of at least `min_run` saturated frames (any channel at or
/// above the threshold) and of exact-zero frames (every channel zero).
///
/// Saturation flags carry the run length over `min_run` as magnitude; dropout
/// flags do the same. The output is sorted by start time.
pub fn detect_cutoffs(clip: &AudioClip, params: CutoffParams) -> Vec<QaFlag> {
    assert!(params.saturation_threshold > 0.0 && params.saturation_threshold <= 1.0);
    assert!(params.min_run >= 1);
    let n = clip.len();
    let rate = clip.sample_rate();
    let saturated = |i: usize| clip.channels().iter().any(|c| c[i].abs() >= params.saturation_threshold);
    let dropout = |i: usize| clip.channels().iter().all(|c| c[i] == 0.0);

    let mut flags = Vec::new();
    let mut scan = |pred: &dyn Fn(usize) -> bool| {
        let mut i = 0;
        while i < n {
            if !pred(i) {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && pred(i) {
                i += 1;
            }
            let run = i - start;
            if run >= params.min_run {
                flags.push(QaFlag::from_samples(
                    QaKind::Cutoff,
                    start,
                    i,
                    rate,
                    run as f64 / params.min_run as f64,
                ));
            }
        }
    };
    scan(&saturated);
    scan(&dropout);
    flags.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
    flags
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseParams {
    pub levels: u32,
    pub wavelet: Wavelet,
    pub rule: ThresholdRule,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            levels: 6,
            wavelet: Wavelet::Haar,
            rule: ThresholdRule::TransientClip,
        }
    }
}

/// Wavelet-domain transient suppression; see [`denoise_transients_flagged`].
pub fn denoise_transients(clip: &AudioClip, params: DenoiseParams) -> Result<AudioClip, AudioError> {
    denoise_transients_flagged(clip, params).map(|(c, _)| c)
}

/// Decomposes each channel, thresholds the detail coefficients, reconstructs.
///
/// Channels are zero-padded to a multiple of `2^levels` and truncated back.
/// Because the transform is orthonormal and thresholding only shrinks
/// coefficient magnitudes, output energy never exceeds input energy.
/// Finest-level coefficients that exceeded the threshold are reported as
/// transient flags (merged when adjacent).
pub fn denoise_transients_flagged(
    clip: &AudioClip,
    params: DenoiseParams,
) -> Result<(AudioClip, Vec<QaFlag>), AudioError> {
    let n = clip.len();
    let block = 1usize
        .checked_shl(params.levels)
        .filter(|_| params.levels >= 1)
        .ok_or(AudioError::TooShortForLevels { len: n, levels: params.levels })?;
    if n < block {
        return Err(AudioError::TooShortForLevels { len: n, levels: params.levels });
    }
    let padded_len = n.div_ceil(block) * block;
    let mut hit_samples = vec![false; n];
    let mut channels = Vec::with_capacity(clip.n_channels());
    for ch in clip.channels() {
        let mut x = ch.clone();
        x.resize(padded_len, 0.0);
        let mut dec = wavelet::decompose(&x, params.wavelet, params.levels);
        let hits = wavelet::threshold_details(&mut dec, params.rule, n);
        for &i in &hits[0] {
            // finest coefficient i summarizes samples 2i and 2i+1
            for s in [2 * i, 2 * i + 1] {
                if s < n {
                    hit_samples[s] = true;
                }
            }
        }
        let mut y = wavelet::reconstruct(&dec, params.wavelet);
        y.truncate(n);
        channels.push(y);
    }
    let out = clip.with_channels(channels)?;

    let mut flags = Vec::new();
    let mut i = 0;
    while i < n {
        if !hit_samples[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && hit_samples[i] {
            i += 1;
        }
        let removed: f64 = clip
            .channels()
            .iter()
            .zip(out.channels())
            .flat_map(|(a, b)| a[start..i].iter().zip(&b[start..i]).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        flags.push(QaFlag::from_samples(QaKind::Transient, start, i, clip.sample_rate(), removed));
    }
    Ok((out, flags))
}

#[derive(Serialize)]
struct FlagLine<'a> {
    kind: QaKind,
    start_s: f64,
    end_s: f64,
    magnitude: f64,
    source_id: &'a str,
}

/// Writes flags as JSON lines: `{"kind","start_s","end_s","magnitude","source_id"}`.
pub fn write_flags_jsonl<W: Write>(mut out: W, source_id: &str, flags: &[QaFlag]) -> std::io::Result<()> {
    for f in flags {
        let line = FlagLine {
            kind: f.kind,
            start_s: f.start_s,
            end_s: f.end_s,
            magnitude: f.magnitude,
            source_id,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
