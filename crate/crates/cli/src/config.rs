//! The single configuration tree every subcommand reads.
//!
//! Resolution order: built-in defaults, then the `--config` JSON file, then
//! `--set key.path=value` overrides, then dedicated flags. Unknown keys are
//! rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use whistle_core::audio::{CutoffParams, DenoiseParams};
use whistle_core::baseline::DetectorParams;
use whistle_core::dataset::{ContourQaParams, ExampleConfig};
use whistle_core::nn::Padding;
use whistle_core::pipeline::{PreprocessConfig, SpectrogramConfig};
use whistle_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub qa: QaConfig,
    pub preprocess: PreprocessConfig,
    pub spectrogram: SpectrogramConfig,
    pub dataset: DatasetConfig,
    pub detector: DetectorParams,
    pub cnn_detector: CnnDetectorConfig,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaConfig {
    pub saturation_threshold: f64,
    pub min_cutoff_s: f64,
    pub bias_tolerance: f64,
    /// Used by `ingest --denoise`.
    pub denoise: DenoiseParams,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self { saturation_threshold: 0.999, min_cutoff_s: 0.01, bias_tolerance: 1e-3, denoise: DenoiseParams::default() }
    }
}

impl QaConfig {
    pub fn cutoff_params(&self, sample_rate: u32) -> CutoffParams {
        CutoffParams {
            saturation_threshold: self.saturation_threshold,
            min_run: ((self.min_cutoff_s * sample_rate as f64).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub min_overlap_fraction: f64,
    pub drop_cutoff_windows: bool,
    pub contour_qa: ContourQaParams,
    pub folds: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let ex = ExampleConfig::default();
        Self {
            min_overlap_fraction: ex.min_overlap_fraction,
            drop_cutoff_windows: ex.drop_cutoff_windows,
            contour_qa: ContourQaParams::default(),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnDetectorConfig {
    /// Whistle probability at or above which a window is a detection.
    pub threshold: f64,
}

impl Default for CnnDetectorConfig {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    #[default]
    Vanilla,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub arch: Arch,
    /// Convolution padding of the vanilla network.
    pub padding: Padding,
    /// Hidden dense widths of the transfer head.
    pub head_units: Vec<usize>,
    /// Backbone layers kept for transfer; all of them when absent.
    pub keep_layers: Option<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { arch: Arch::Vanilla, padding: Padding::Valid, head_units: vec![50, 20], keep_layers: None }
    }
}

/// Training settings; the seed comes from the top-level `seed`. A missing
/// learning rate resolves to the architecture's default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub lr: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::vanilla();
        Self { lr: None, batch_size: t.batch_size, max_epochs: t.max_epochs, patience: t.patience }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Fraction of a true whistle an event must cover to count as a hit.
    pub min_overlap_fraction: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { min_overlap_fraction: 0.05 }
    }
}

impl PipelineConfig {
    /// Defaults, then the file, then `key.path=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree = serde_json::to_value(Self::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let user: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !user.is_object() {
                return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
            }
            merge(&mut tree, user);
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key.path=value, got {item:?}")))?;
            // bare words that are not JSON are taken as strings
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut tree, key, value)?;
        }
        let config: Self = serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    /// Fills every implicit default so the run record is complete.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if self.train.lr.is_none() {
            self.train.lr = Some(self.arch_defaults().lr);
        }
        self.validate()?;
        Ok(self)
    }

    fn arch_defaults(&self) -> TrainConfig {
        match self.model.arch {
            Arch::Vanilla => TrainConfig::vanilla(),
            Arch::Transfer => TrainConfig::transfer(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr.unwrap_or(self.arch_defaults().lr),
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed: self.seed,
        }
    }

    pub fn example_config(&self) -> ExampleConfig {
        ExampleConfig {
            preprocess: self.preprocess.clone(),
            spectrogram: self.spectrogram,
            min_overlap_fraction: self.dataset.min_overlap_fraction,
            drop_cutoff_windows: self.dataset.drop_cutoff_windows,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.detector.validate().map_err(|e| CliError::Config(format!("detector: {e}")))?;
        self.train_config().validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        if self.dataset.folds < 2 {
            return Err(CliError::Config(format!("dataset.folds must be at least 2, got {}", self.dataset.folds)));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("dataset.min_overlap_fraction", self.dataset.min_overlap_fraction)?;
        unit("evaluation.min_overlap_fraction", self.evaluation.min_overlap_fraction)?;
        unit("cnn_detector.threshold", self.cnn_detector.threshold)?;
        if !(self.qa.saturation_threshold > 0.0 && self.qa.saturation_threshold <= 1.0) {
            return Err(CliError::Config(format!("qa.saturation_threshold must lie in (0, 1], got {}", self.qa.saturation_threshold)));
        }
        if !(self.qa.min_cutoff_s > 0.0) {
            return Err(CliError::Config("qa.min_cutoff_s must be positive".into()));
        }
        if self.spectrogram.image_size == 0 || !(self.spectrogram.window_s > 0.0 && self.spectrogram.shift_s > 0.0) {
            return Err(CliError::Config("spectrogram window, shift and image size must be positive".into()));
        }
        Ok(())
    }
}

/// Objects merge key by key; anything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        // left for deserialization to reject
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(CliError::Config(format!("{key}: {} is not a section", parts[..i].join("."))));
        };
        // null marks an absent optional section, which may be filled in
        let slot = map.get_mut(*part).ok_or_else(|| CliError::Config(format!("unknown key {key}")))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        if slot.is_null() {
            *slot = Value::Object(Default::default());
        }
        node = slot;
    }
    Err(CliError::Usage("empty --set key".into()))
}
