//! Algorithmic whistle detector: noise removal on the dB spectrogram,
//! thresholding, connected-region search and linking of nearby regions.

mod noise;
mod regions;

pub use noise::{default_noise_chain, remove_noise, NoiseStep};
pub use regions::{connected_regions, merge_regions, Connectivity, DisjointSet, Region};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::pipeline::{self, PreprocessConfig, SpectrogramConfig};
use crate::spectrogram::Spectrogram;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    pub noise_removal: Vec<NoiseStep>,
    /// Cells above this level (dB over the residual noise) are candidates.
    pub threshold_db: f64,
    pub connectivity: Connectivity,
    pub min_region_cells: usize,
    pub max_gap_frames: usize,
    pub max_gap_bins: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            noise_removal: default_noise_chain(),
            threshold_db: 8.0,
            connectivity: Connectivity::Eight,
            min_region_cells: 20,
            max_gap_frames: 2,
            max_gap_bins: 3,
            min_duration_s: 0.14,
            max_duration_s: 0.78,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold_db > 0.0) {
            return Err(format!("threshold_db must be positive, got {}", self.threshold_db));
        }
        if !(self.min_duration_s <= self.max_duration_s) {
            return Err(format!("min_duration_s {} exceeds max_duration_s {}", self.min_duration_s, self.max_duration_s));
        }
        for step in &self.noise_removal {
            if let NoiseStep::MovingAverageSmooth { frames, bins } = *step {
                if frames % 2 == 0 || bins % 2 == 0 {
                    return Err(format!("smoothing kernel {frames}x{bins} must have odd sides"));
                }
            }
        }
        Ok(())
    }
}

/// A detected whistle, with frequency limits at the outer bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub f_lo_khz: f64,
    pub f_hi_khz: f64,
    pub score: f64,
    pub n_cells: usize,
}

impl DetectionEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

fn hop_seconds(spec: &Spectrogram) -> f64 {
    if spec.n_frames >= 2 {
        spec.frame_step_s()
    } else {
        // frame centres sit half a window after the frame start
        spec.params.hop as f64 * 2.0 * spec.time_axis_s[0] / spec.params.window_len as f64
    }
}

pub fn threshold_cells(processed: &Spectrogram, threshold_db: f64) -> Vec<bool> {
    processed.values.iter().map(|&v| v > threshold_db).collect()
}

/// Noise removal, thresholding, region labeling and merging, before the
/// size and duration filters.
pub fn candidate_regions(spec: &Spectrogram, params: &DetectorParams) -> (Spectrogram, Vec<Region>) {
    let processed = remove_noise(spec, &params.noise_removal);
    let grid = threshold_cells(&processed, params.threshold_db);
    let regions = connected_regions(&grid, spec.n_frames, spec.n_bins, params.connectivity);
    let merged = merge_regions(&regions, params.max_gap_frames, params.max_gap_bins);
    (processed, merged)
}

fn to_event(region: &Region, processed: &Spectrogram, hop_s: f64) -> DetectionEvent {
    let (f0, f1, b0, b1) = region.bounds();
    let half_bin = processed.bin_width_khz() / 2.0;
    let score = region.cells.iter().map(|&(f, b)| processed.at(f, b)).sum::<f64>() / region.len() as f64;
    DetectionEvent {
        start_s: processed.time_axis_s[f0] - hop_s / 2.0,
        end_s: processed.time_axis_s[f1] + hop_s / 2.0,
        f_lo_khz: processed.freq_axis_khz[b0] - half_bin,
        f_hi_khz: processed.freq_axis_khz[b1] + half_bin,
        score,
        n_cells: region.len(),
    }
}

/// Regions that survive the size and duration filters.
pub fn event_regions(spec: &Spectrogram, params: &DetectorParams) -> (Spectrogram, Vec<Region>) {
    let (processed, regions) = candidate_regions(spec, params);
    let hop_s = hop_seconds(spec);
    let kept = regions
        .into_iter()
        .filter(|r| r.len() >= params.min_region_cells)
        .filter(|r| {
            let (f0, f1, _, _) = r.bounds();
            let d = (f1 - f0 + 1) as f64 * hop_s;
            d >= params.min_duration_s - 1e-9 && d <= params.max_duration_s + 1e-9
        })
        .collect();
    (processed, kept)
}

/// Detects whistles in a dB spectrogram. Events are sorted by start time.
pub fn detect(spec: &Spectrogram, params: &DetectorParams) -> Vec<DetectionEvent> {
    let (processed, regions) = event_regions(spec, params);
    let hop_s = hop_seconds(spec);
    let mut events: Vec<DetectionEvent> = regions.iter().map(|r| to_event(r, &processed, hop_s)).collect();
    events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.f_lo_khz.total_cmp(&b.f_lo_khz)));
    events
}

/// Preprocesses a recording, computes its cropped dB spectrogram and runs
/// [`detect`] over the whole of it.
pub fn detect_clip(
    clip: &AudioClip,
    preprocess: &PreprocessConfig,
    spectrogram: &SpectrogramConfig,
    params: &DetectorParams,
) -> Result<Vec<DetectionEvent>, Error> {
    let clean = pipeline::preprocess(clip, preprocess, None)?;
    let spec = pipeline::cropped_db_spectrogram(&clean, spectrogram)?;
    Ok(detect(&spec, params))
}

#[derive(Serialize)]
struct EventLine<'a> {
    file_id: &'a str,
    #[serde(flatten)]
    event: &'a DetectionEvent,
}

pub fn write_events_jsonl<'a, W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = (&'a str, &'a DetectionEvent)>,
) -> std::io::Result<()> {
    for (file_id, event) in events {
        serde_json::to_writer(&mut out, &EventLine { file_id, event })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// `file_id,start_s,end_s,f_lo_khz,f_hi_khz,score` with a header row.
pub fn write_events_csv<'a, W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = (&'a str, &'a DetectionEvent)>,
) -> std::io::Result<()> {
    writeln!(out, "file_id,start_s,end_s,f_lo_khz,f_hi_khz,score")?;
    for (id, e) in events {
        writeln!(out, "{id},{},{},{},{},{}", e.start_s, e.end_s, e.f_lo_khz, e.f_hi_khz, e.score)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrogram::{PowerScale, StftParams};

    fn flat(frames: usize, bins: usize) -> Spectrogram {
        Spectrogram {
            values: vec![-80.0; frames * bins],
            n_frames: frames,
            n_bins: bins,
            time_axis_s: (0..frames).map(|f| 0.01 + 0.02 * f as f64).collect(),
            freq_axis_khz: (0..bins).map(|b| 3.0 + 0.1 * b as f64).collect(),
            params: StftParams::default(),
            scale: PowerScale::Decibel,
        }
    }

    fn raw_params() -> DetectorParams {
        DetectorParams {
            noise_removal: vec![],
            min_region_cells: 2,
            min_duration_s: 0.0,
            max_duration_s: f64::INFINITY,
            ..DetectorParams::default()
        }
    }

    #[test]
    fn below_threshold_gives_nothing() {
        assert!(detect(&flat(20, 10), &DetectorParams::default()).is_empty());
    }

    #[test]
    fn two_adjacent_cells_form_one_event() {
        let mut s = flat(6, 6);
        s.values.iter_mut().for_each(|v| *v = 0.0);
        s.values[2 * 6 + 2] = 20.0;
        s.values[3 * 6 + 3] = 20.0;
        let events = detect(&s, &raw_params());
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.n_cells, 2);
        assert_eq!(e.score, 20.0);
        assert!((e.start_s - 0.04).abs() < 1e-12 && (e.end_s - 0.08).abs() < 1e-12);
        assert!((e.f_lo_khz - 3.15).abs() < 1e-12 && (e.f_hi_khz - 3.35).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let e = DetectionEvent { start_s: 1.0, end_s: 1.5, f_lo_khz: 5.0, f_hi_khz: 9.0, score: 12.5, n_cells: 30 };
        let mut buf = Vec::new();
        write_events_csv(&mut buf, [("a", &e)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "file_id,start_s,end_s,f_lo_khz,f_hi_khz,score\na,1,1.5,5,9,12.5\n");
        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, [("a", &e)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(r#"{"file_id":"a","start_s":1.0"#));
    }

    #[test]
    fn params_round_trip_through_json() {
        let p = DetectorParams::default();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains(r#""connectivity":"8""#));
        assert_eq!(serde_json::from_str::<DetectorParams>(&text).unwrap(), p);
    }
}
