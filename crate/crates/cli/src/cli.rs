use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Arch;

#[derive(Debug, Parser)]
#[command(name = "whistle", version, about = "Dolphin whistle detection from hydrophone recordings")]
pub struct Cli {
    /// Run seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set detector.threshold_db=10`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Where to write the run record (default depends on the command).
    #[arg(long, global = true, value_name = "FILE")]
    pub run_record: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average channels, remove DC bias and flag cut-offs, bias and transients.
    Ingest(IngestArgs),
    /// Band-limit and whiten a recording.
    Preprocess(PreprocessArgs),
    /// Render a spectrogram, or build the training cache from a manifest.
    Spectrify(SpectrifyArgs),
    /// Drop duration outliers and contours failing quality checks.
    LabelQa(LabelQaArgs),
    /// Split a manifest into train and test sets by recording date.
    Split(SplitArgs),
    /// Train a CNN on a cached example set.
    Train(TrainArgs),
    /// Detect whistles in recordings.
    Detect(DetectArgs),
    /// Score detections against annotations, or a model against a cache.
    Evaluate(EvaluateArgs),
    /// Re-render a saved evaluation report.
    Report(ReportArgs),
    /// Generate test signals and synthetic scenes.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Preprocess(_) => "preprocess",
            Command::Spectrify(_) => "spectrify",
            Command::LabelQa(_) => "label-qa",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Detect(_) => "detect",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bits {
    #[value(name = "16")]
    Sixteen,
    #[value(name = "24")]
    TwentyFour,
}

impl From<Bits> for whistle_core::audio::BitDepth {
    fn from(b: Bits) -> Self {
        match b {
            Bits::Sixteen => Self::Pcm16,
            Bits::TwentyFour => Self::Pcm24,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for the mono recordings and `qa.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also suppress transients with wavelet thresholding.
    #[arg(long)]
    pub denoise: bool,
    #[arg(long, value_enum, default_value = "24")]
    pub bits: Bits,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Apply this whitening curve instead of estimating one.
    #[arg(long, value_name = "CSV")]
    pub curve_in: Option<PathBuf>,
    /// Save the whitening curve that was applied.
    #[arg(long, value_name = "CSV")]
    pub curve_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "24")]
    pub bits: Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Csv,
    Png,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["input", "manifest"]))]
pub struct SpectrifyArgs {
    /// Single recording to render.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Manifest to turn into a cache of labelled window images.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output file (single recording) or cache directory (manifest).
    #[arg(long)]
    pub out: PathBuf,
    /// Single-recording format; taken from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<ImageFormat>,
    /// Skip preprocessing of a single recording.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct LabelQaArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Filtered manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary of what was dropped.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub train_from: NaiveDate,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub train_to: NaiveDate,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub test_from: NaiveDate,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub test_to: NaiveDate,
    /// Directory for `train.jsonl` and `test.jsonl`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Cache directory built by `spectrify --manifest`.
    #[arg(long)]
    pub cache: PathBuf,
    /// Output directory for the checkpoint, history and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `model.arch`.
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    /// Checkpoint whose layers seed a transfer model.
    #[arg(long)]
    pub backbone: Option<PathBuf>,
    /// Also run k-fold cross-validation.
    #[arg(long)]
    pub cv: bool,
    /// Overrides `dataset.folds`.
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Baseline,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub engine: Engine,
    /// WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trained checkpoint, required by the CNN engine.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Taken from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<EventFormat>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detections from `detect` (JSON lines or CSV).
    #[arg(long, requires = "truth", conflicts_with_all = ["model", "cache"])]
    pub events: Option<PathBuf>,
    /// Manifest holding the true whistles.
    #[arg(long, requires = "events")]
    pub truth: Option<PathBuf>,
    /// Checkpoint to score against a cache.
    #[arg(long, requires = "cache")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub cache: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `evaluation.min_overlap_fraction`.
    #[arg(long)]
    pub min_overlap: Option<f64>,
    /// Report title.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

impl From<OutputFormat> for whistle_core::eval::ReportFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Self::Json,
            OutputFormat::Csv => Self::Csv,
            OutputFormat::Svg => Self::Svg,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `evaluate` or `train`.
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv,svg")]
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Chirp,
    Sine,
    Noise,
    /// Noise with embedded chirps plus a manifest of where they are.
    Scene,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 5_000.0)]
    pub f0: f64,
    #[arg(long, default_value_t = 15_000.0)]
    pub f1: f64,
    /// Seconds; 1 for signals and 60 for scenes when omitted.
    #[arg(long)]
    pub dur: Option<f64>,
    /// Peak amplitude for tones, standard deviation for noise.
    #[arg(long, default_value_t = 0.5)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 96_000)]
    pub rate: u32,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "16")]
    pub bits: Bits,
    /// Scene manifest (default: next to the WAV with a `.jsonl` extension).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n_chirps: usize,
    /// In-band chirp SNR of a scene.
    #[arg(long, default_value_t = 10.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0.01)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0.14)]
    pub min_chirp: f64,
    #[arg(long, default_value_t = 0.78)]
    pub max_chirp: f64,
    /// Recording date written to the scene manifest.
    #[arg(long, default_value = "2021-07-25")]
    pub date: NaiveDate,
}
