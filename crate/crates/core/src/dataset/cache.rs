//! Labeled spectrogram images cached on disk.
//!
//! Layout: `index.json` listing every example, plus one binary file per image
//! holding a `u32` dimension count, the `u32` dimensions, and the `f32`
//! values, all little-endian.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Annotation, DatasetError, Label, ManifestEntry};
use crate::audio::{decode_audio, detect_cutoffs, CutoffParams};
use crate::pipeline::{self, PreprocessConfig, SpectrogramConfig};
use crate::spectrogram::SpectroImage;
use crate::Error;

pub const INDEX_FILE: &str = "index.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExampleConfig {
    pub preprocess: PreprocessConfig,
    pub spectrogram: SpectrogramConfig,
    /// A window is a whistle example when its overlap with some whistle
    /// annotation is positive and at least this fraction of that whistle's
    /// duration.
    pub min_overlap_fraction: f64,
    /// Skip windows that overlap a cut-off flag (saturation or dropout) found
    /// on the raw recording with the default thresholds for its rate.
    pub drop_cutoff_windows: bool,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            spectrogram: SpectrogramConfig::default(),
            min_overlap_fraction: 0.0,
            drop_cutoff_windows: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedExample {
    pub file: String,
    pub file_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleIndex {
    pub format_version: u32,
    /// Height, width, channels of every image.
    pub shape: [usize; 3],
    pub examples: Vec<CachedExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub index: ExampleIndex,
    /// Windows skipped for overlapping a cut-off flag.
    pub dropped_windows: usize,
    /// `(file_id, error message)` for recordings that could not be processed.
    pub failures: Vec<(String, String)>,
}

pub fn window_label(annotations: &[Annotation], start_s: f64, end_s: f64, min_overlap_fraction: f64) -> Label {
    let hit = annotations.iter().filter(|a| a.label.is_whistle()).any(|a| {
        let overlap = a.overlap_s(start_s, end_s);
        overlap > 0.0 && overlap >= min_overlap_fraction * a.duration_s()
    });
    if hit {
        Label::Whistle
    } else {
        Label::Noise
    }
}

type Examples = (Vec<(SpectroImage, Label)>, usize);

fn examples_for_entry(entry: &ManifestEntry, base_dir: &Path, config: &ExampleConfig) -> Result<Examples, Error> {
    let path = if entry.path.is_absolute() { entry.path.clone() } else { base_dir.join(&entry.path) };
    let clip = decode_audio(&path)?.with_source_id(entry.file_id.clone());
    let flags = if config.drop_cutoff_windows { detect_cutoffs(&clip, CutoffParams::for_rate(clip.sample_rate())) } else { Vec::new() };
    let clean = pipeline::preprocess(&clip, &config.preprocess, None)?;
    let images = pipeline::window_images(&clean, &config.spectrogram)?;
    let total = images.len();
    let kept: Vec<_> = images
        .into_iter()
        .filter(|img| !flags.iter().any(|f| f.overlaps(img.window_s.0, img.window_s.1)))
        .map(|img| {
            let label = window_label(&entry.annotations, img.window_s.0, img.window_s.1, config.min_overlap_fraction);
            (img, label)
        })
        .collect();
    let dropped = total - kept.len();
    Ok((kept, dropped))
}

/// Processes every recording (in parallel), labels each window and writes the
/// cache. Output is identical for identical inputs regardless of thread
/// count. Recordings that fail are listed in the report and skipped.
pub fn build_example_set(
    entries: &[ManifestEntry],
    base_dir: &Path,
    config: &ExampleConfig,
    out_dir: &Path,
) -> Result<BuildReport, Error> {
    fs::create_dir_all(out_dir)?;
    let results: Vec<_> = entries.par_iter().map(|e| examples_for_entry(e, base_dir, config)).collect();
    let size = config.spectrogram.image_size;
    let mut index = ExampleIndex { format_version: FORMAT_VERSION, shape: [size, size, 3], examples: Vec::new() };
    let mut failures = Vec::new();
    let mut dropped_windows = 0;
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok((examples, dropped)) => {
                dropped_windows += dropped;
                for (img, label) in examples {
                    let file = format!("{:06}.f32", index.examples.len());
                    write_array(&out_dir.join(&file), &index.shape, &img.pixels)?;
                    index.examples.push(CachedExample {
                        file,
                        file_id: entry.file_id.clone(),
                        start_s: img.window_s.0,
                        end_s: img.window_s.1,
                        label,
                    });
                }
            }
            Err(e) => failures.push((entry.file_id.clone(), e.to_string())),
        }
    }
    let json = serde_json::to_vec_pretty(&index).expect("index serializes");
    fs::write(out_dir.join(INDEX_FILE), json)?;
    Ok(BuildReport { index, dropped_windows, failures })
}

pub fn write_array(path: &Path, shape: &[usize], data: &[f32]) -> Result<(), DatasetError> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Vec<usize>, Vec<f32>), DatasetError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let corrupt = |why: &str| DatasetError::CorruptCache(format!("{}: {why}", path.display()));
    let word = |i: usize| -> Option<u32> { bytes.get(4 * i..4 * i + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap())) };
    let ndim = word(0).ok_or_else(|| corrupt("missing header"))? as usize;
    let shape: Vec<usize> = (1..=ndim)
        .map(|i| word(i).map(|d| d as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| corrupt("truncated shape"))?;
    let offset = 4 * (ndim + 1);
    let count: usize = shape.iter().product();
    if bytes.len() != offset + 4 * count {
        return Err(corrupt(&format!("expected {} payload bytes, found {}", 4 * count, bytes.len() - offset.min(bytes.len()))));
    }
    let data = bytes[offset..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((shape, data))
}

/// Reads the index and every image, checking shapes against the index.
pub fn load_example_set(dir: &Path) -> Result<(ExampleIndex, Vec<Vec<f32>>), DatasetError> {
    let text = fs::read_to_string(dir.join(INDEX_FILE))?;
    let index: ExampleIndex =
        serde_json::from_str(&text).map_err(|e| DatasetError::CorruptCache(format!("{INDEX_FILE}: {e}")))?;
    if index.format_version != FORMAT_VERSION {
        return Err(DatasetError::CorruptCache(format!("unsupported format version {}", index.format_version)));
    }
    let images = index
        .examples
        .iter()
        .map(|ex| {
            let path: PathBuf = dir.join(&ex.file);
            let (shape, data) = read_array(&path)?;
            if shape != index.shape {
                return Err(DatasetError::CorruptCache(format!("{}: shape {shape:?}", ex.file)));
            }
            Ok(data)
        })
        .collect::<Result<_, _>>()?;
    Ok((index, images))
}
