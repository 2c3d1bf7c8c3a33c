use std::io::Write;
use std::path::{Path, PathBuf};

use whistle_core::audio::decode_audio;
use whistle_core::dataset::{
    build_example_set, contour_qa, split_by_date, tukey_duration_filter, DateRange, Label, Manifest, ManifestEntry,
};
use whistle_core::pipeline::{cropped_db_spectrogram, preprocess};
use whistle_core::spectrogram::{gray_levels, write_png};

use super::{base_dir, create, make_dir, read_manifest, sidecar, summary};
use crate::cli::{ImageFormat, LabelQaArgs, SpectrifyArgs, SplitArgs};
use crate::error::CliError;
use crate::record::Context;

pub fn spectrify(args: &SpectrifyArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    if let Some(manifest_path) = &args.manifest {
        return build_cache(manifest_path, &args.out, ctx);
    }
    let input = args.input.as_ref().expect("clap requires --in or --manifest");
    let format = args.format.unwrap_or_else(|| {
        let png = args.out.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if png {
            ImageFormat::Png
        } else {
            ImageFormat::Csv
        }
    });
    let mut clip = decode_audio(input)?;
    ctx.input(input);
    if !args.raw {
        clip = preprocess(&clip, &ctx.config.preprocess, None)?;
    }
    let spec = cropped_db_spectrogram(&clip, &ctx.config.spectrogram)?;
    let mut out = create(&args.out)?;
    match format {
        ImageFormat::Csv => spec.write_csv(&mut out).map_err(CliError::io(&args.out))?,
        ImageFormat::Png => write_png(&gray_levels(&spec), &mut out)?,
    }
    out.flush().map_err(CliError::io(&args.out))?;
    ctx.output(&args.out);
    summary(serde_json::json!({ "frames": spec.n_frames, "bins": spec.n_bins }));
    Ok(sidecar(&args.out))
}

fn build_cache(manifest_path: &Path, out: &Path, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let manifest = read_manifest(manifest_path)?;
    ctx.input(manifest_path);
    let base = base_dir(manifest_path);
    for e in &manifest.entries {
        let audio = base.join(&e.path);
        if audio.is_file() {
            ctx.input(audio);
        }
    }
    make_dir(out)?;
    let report = build_example_set(&manifest.entries, &base, &ctx.config.example_config(), out)?;
    ctx.output(out);
    for (id, why) in &report.failures {
        eprintln!("{}", serde_json::json!({ "warning": { "file_id": id, "message": why } }));
    }
    if !manifest.entries.is_empty() && report.failures.len() == manifest.entries.len() {
        return Err(CliError::Input("no manifest entry could be processed".into()));
    }
    let whistles = report.index.examples.iter().filter(|e| e.label == Label::Whistle).count();
    summary(serde_json::json!({
        "examples": report.index.examples.len(),
        "whistle": whistles,
        "noise": report.index.examples.len() - whistles,
        "dropped_windows": report.dropped_windows,
        "failures": report.failures.len(),
    }));
    Ok(out.join("run.json"))
}

pub fn label_qa(args: &LabelQaArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let manifest = read_manifest(&args.manifest)?;
    ctx.input(&args.manifest);
    let all: Vec<_> = manifest.annotations().cloned().collect();
    let tukey = tukey_duration_filter(&all)?;
    let params = ctx.config.dataset.contour_qa;

    let (mut checked, mut bad_band, mut bad_intensity) = (0usize, 0usize, 0usize);
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let mut kept = Vec::new();
        for ann in &entry.annotations {
            // annotations are compared with their file id attached, as in `all`
            let mut probe = ann.clone();
            probe.file_id = entry.file_id.clone();
            if tukey.discarded.contains(&probe) {
                continue;
            }
            if ann.label == Label::Whistle && ann.contour.is_some() {
                let qa = contour_qa(&probe, &params)?;
                checked += 1;
                bad_band += usize::from(!qa.bandwidth_ok);
                bad_intensity += usize::from(!qa.intensity_ok);
                if !qa.passed() {
                    continue;
                }
            }
            kept.push(ann.clone());
        }
        entries.push(ManifestEntry { annotations: kept, ..entry.clone() });
    }
    let filtered = Manifest::new(rebase(entries, &args.manifest, &args.out)?)?;
    write_manifest(&filtered, &args.out)?;
    ctx.output(&args.out);

    let whistles = |m: &Manifest| m.annotations().filter(|a| a.label == Label::Whistle).count();
    let report = serde_json::json!({
        "files": manifest.entries.len(),
        "whistles_in": whistles(&manifest),
        "whistles_out": whistles(&filtered),
        "tukey": {
            "q1": tukey.q1,
            "q3": tukey.q3,
            "fences": [tukey.fences.0, tukey.fences.1],
            "discarded": tukey.discarded.len(),
        },
        "contour": {
            "checked": checked,
            "failed_bandwidth": bad_band,
            "failed_intensity": bad_intensity,
        },
    });
    if let Some(path) = &args.summary {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report).expect("summary serializes");
        out.write_all(b"\n").and_then(|_| out.flush()).map_err(CliError::io(path))?;
        ctx.output(path);
    }
    summary(report);
    Ok(sidecar(&args.out))
}

pub fn split(args: &SplitArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let manifest = read_manifest(&args.manifest)?;
    ctx.input(&args.manifest);
    let train = DateRange::new(args.train_from, args.train_to)?;
    let test = DateRange::new(args.test_from, args.test_to)?;
    let s = split_by_date(&manifest, train, test)?;
    make_dir(&args.out_dir)?;
    let (train_path, test_path) = (args.out_dir.join("train.jsonl"), args.out_dir.join("test.jsonl"));
    for (entries, path) in [(s.train.clone(), &train_path), (s.test.clone(), &test_path)] {
        write_manifest(&Manifest::new(rebase(entries, &args.manifest, path)?)?, path)?;
        ctx.output(path);
    }
    summary(serde_json::json!({ "train": s.train.len(), "test": s.test.len(), "excluded": s.excluded }));
    Ok(args.out_dir.join("run.json"))
}

fn write_manifest(m: &Manifest, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    m.write_jsonl(&mut out)?;
    out.flush().map_err(CliError::io(path))
}

/// Keeps relative audio paths valid when a manifest is written somewhere
/// other than the directory it was read from.
fn rebase(mut entries: Vec<ManifestEntry>, from: &Path, to: &Path) -> Result<Vec<ManifestEntry>, CliError> {
    let canon = |m: &Path| -> Result<PathBuf, CliError> {
        let d = base_dir(m);
        let d = if d.as_os_str().is_empty() { PathBuf::from(".") } else { d };
        make_dir(&d)?;
        d.canonicalize().map_err(CliError::io(&d))
    };
    let (src, dst) = (canon(from)?, canon(to)?);
    if src != dst {
        for e in &mut entries {
            if e.path.is_relative() {
                e.path = src.join(&e.path);
            }
        }
    }
    Ok(entries)
}
