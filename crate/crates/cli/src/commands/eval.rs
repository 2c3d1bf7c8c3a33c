use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use whistle_core::baseline::DetectionEvent;
use whistle_core::dataset::load_example_set;
use whistle_core::eval::{emit_report, match_by_file, ConfusionMatrix, EvalReport, ReportFormat};
use whistle_core::nn::load_checkpoint;
use whistle_core::train::{predict, score_metrics, LabeledSet};

use super::{open, read_manifest, summary, ALL_FORMATS};
use crate::cli::{EvaluateArgs, ReportArgs};
use crate::error::CliError;
use crate::record::Context;

#[derive(Deserialize)]
struct EventLine {
    file_id: String,
    #[serde(flatten)]
    event: DetectionEvent,
}

/// JSON lines as written by `detect`, or its CSV form.
fn read_events(path: &Path) -> Result<Vec<(String, DetectionEvent)>, CliError> {
    let csv = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let bad = |line: usize, why: String| CliError::Input(format!("{}:{line}: {why}", path.display()));
    let mut events = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() || (csv && i == 0) {
            continue;
        }
        if csv {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad(i + 1, format!("expected 6 columns, found {}", cols.len())));
            }
            let num = |c: &str| c.trim().parse::<f64>().map_err(|e| bad(i + 1, e.to_string()));
            let event = DetectionEvent {
                start_s: num(cols[1])?,
                end_s: num(cols[2])?,
                f_lo_khz: num(cols[3])?,
                f_hi_khz: num(cols[4])?,
                score: num(cols[5])?,
                n_cells: 0,
            };
            events.push((cols[0].to_string(), event));
        } else {
            let l: EventLine = serde_json::from_str(&line).map_err(|e| bad(i + 1, e.to_string()))?;
            events.push((l.file_id, l.event));
        }
    }
    Ok(events)
}

pub fn evaluate(args: &EvaluateArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let fingerprint = EvalReport::fingerprint(&ctx.config);
    let report = match (&args.events, &args.truth, &args.model, &args.cache) {
        (Some(events_path), Some(truth_path), None, None) => {
            let events = read_events(events_path)?;
            let truth = read_manifest(truth_path)?;
            ctx.input(events_path);
            ctx.input(truth_path);
            let truths: Vec<_> = truth.annotations().cloned().collect();
            let m = match_by_file(&events, &truths, ctx.config.evaluation.min_overlap_fraction);
            // event matching has no true negatives
            let confusion = ConfusionMatrix { tp: m.tp as u64, fp: m.fp as u64, tn: 0, fn_: m.fn_ as u64 };
            let name = args.name.clone().unwrap_or_else(|| "detections".into());
            EvalReport::new(name, confusion.metrics(), None, Vec::new(), fingerprint)
        }
        (None, None, Some(model_path), Some(cache)) => {
            let ckpt = load_checkpoint(model_path)?;
            let (index, arrays) = load_example_set(cache)?;
            ctx.input(model_path);
            ctx.input(cache);
            let set = LabeledSet::from_cache(&index, arrays)?;
            let scores = predict(&ckpt.model()?, &set)?;
            let (metrics, roc) = score_metrics(&set.labels, &scores)?;
            let name = args.name.clone().unwrap_or_else(|| "classification".into());
            EvalReport::new(name, metrics, Some(roc), Vec::new(), fingerprint)
        }
        _ => return Err(CliError::Usage("evaluate needs --events with --truth, or --model with --cache".into())),
    };
    let written = emit_report(&report, &args.out, &ALL_FORMATS)?;
    for path in &written {
        ctx.output(path);
    }
    let c = report.metrics.confusion;
    summary(serde_json::json!({
        "tp": c.tp,
        "fp": c.fp,
        "tn": c.tn,
        "fn": c.fn_,
        "precision": report.metrics.precision.value(),
        "recall": report.metrics.recall.value(),
        "auc": report.roc.as_ref().map(|r| r.auc),
    }));
    Ok(args.out.join("run.json"))
}

pub fn report(args: &ReportArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(&args.from).map_err(CliError::io(&args.from))?;
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.from.display())))?;
    ctx.input(&args.from);
    if !report.is_consistent() {
        return Err(CliError::Input(format!("{}: rates disagree with the confusion counts", args.from.display())));
    }
    let formats: Vec<ReportFormat> = args.formats.iter().map(|&f| f.into()).collect();
    for path in emit_report(&report, &args.out, &formats)? {
        ctx.output(path);
    }
    summary(serde_json::json!({ "name": report.name, "accuracy": report.metrics.accuracy.value() }));
    Ok(args.out.join("run.json"))
}
