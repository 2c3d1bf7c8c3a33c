use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use whistle_core::audio::{decode_audio, detect_cutoffs, QaFlag};
use whistle_core::baseline::{detect_clip, write_events_csv, write_events_jsonl, DetectionEvent};
use whistle_core::nn::{load_checkpoint, Model};
use whistle_core::pipeline::{preprocess, window_images, SpectrogramConfig};
use whistle_core::train::{score_windows, windows_to_events};

use super::{create, list_wavs, sidecar, stem, summary};
use crate::cli::{DetectArgs, Engine, EventFormat};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::record::Context;

enum Detector {
    Baseline,
    Cnn { model: Model<f32>, spectrogram: SpectrogramConfig },
}

impl Detector {
    /// Events in one recording; nothing is reported over cut-offs.
    fn run(&self, path: &Path, config: &PipelineConfig) -> Result<Vec<DetectionEvent>, CliError> {
        let clip = decode_audio(path)?;
        let cutoffs = detect_cutoffs(&clip, config.qa.cutoff_params(clip.sample_rate()));
        let clear = |s: f64, e: f64| !cutoffs.iter().any(|f: &QaFlag| f.overlaps(s, e));
        match self {
            Detector::Baseline => {
                let mut events = detect_clip(&clip, &config.preprocess, &config.spectrogram, &config.detector)?;
                events.retain(|e| clear(e.start_s, e.end_s));
                Ok(events)
            }
            Detector::Cnn { model, spectrogram } => {
                let clean = preprocess(&clip, &config.preprocess, None)?;
                let mut images = window_images(&clean, spectrogram)?;
                images.retain(|img| clear(img.window_s.0, img.window_s.1));
                let scores = score_windows(model, &images)?;
                let windows: Vec<(f64, f64)> = images.iter().map(|i| i.window_s).collect();
                Ok(windows_to_events(&windows, &scores, config.cnn_detector.threshold, spectrogram.crop_khz))
            }
        }
    }
}

pub fn detect(args: &DetectArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let files = list_wavs(&args.input)?;
    let detector = match args.engine {
        Engine::Baseline => Detector::Baseline,
        Engine::Cnn => {
            let path = args.model.as_ref().ok_or_else(|| CliError::Usage("--engine cnn needs --model".into()))?;
            let ckpt = load_checkpoint(path)?;
            ctx.input(path);
            let [h, w, c] = ckpt.config.input;
            if h != w || c != 3 {
                return Err(CliError::Input(format!("model input {h}x{w}x{c} is not a square RGB image")));
            }
            let model = ckpt.model()?;
            Detector::Cnn { model, spectrogram: SpectrogramConfig { image_size: h, ..ctx.config.spectrogram } }
        }
    };
    let config = &ctx.config;
    let results: Vec<Result<Vec<DetectionEvent>, CliError>> = files.par_iter().map(|f| detector.run(f, config)).collect();
    let mut all: Vec<(String, DetectionEvent)> = Vec::new();
    for (file, result) in files.iter().zip(results) {
        let id = stem(file);
        all.extend(result?.into_iter().map(|e| (id.clone(), e)));
    }
    for f in &files {
        ctx.input(f);
    }

    let csv = match args.format {
        Some(f) => f == EventFormat::Csv,
        None => args.out.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    let mut out = create(&args.out)?;
    let rows = all.iter().map(|(id, e)| (id.as_str(), e));
    if csv {
        write_events_csv(&mut out, rows)
    } else {
        write_events_jsonl(&mut out, rows)
    }
    .and_then(|_| out.flush())
    .map_err(CliError::io(&args.out))?;
    ctx.output(&args.out);
    summary(serde_json::json!({ "files": files.len(), "events": all.len() }));
    Ok(sidecar(&args.out))
}
