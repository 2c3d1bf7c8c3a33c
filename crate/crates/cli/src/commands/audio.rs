use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use whistle_core::audio::{
    average_channels, decode_audio, denoise_transients_flagged, detect_bias, detect_cutoffs, remove_dc_bias, write_flags_jsonl,
    write_wav, AudioClip, QaFlag,
};
use whistle_core::dataset::{Manifest, ManifestEntry};
use whistle_core::dsp::{synthesize, synthesize_scene, SceneSpec, SignalKind, SynthSpec, WhiteningCurve};
use whistle_core::pipeline::preprocess_with_curve;

use super::{create, list_wavs, make_dir, open, sidecar, stem, summary};
use crate::cli::{IngestArgs, PreprocessArgs, SynthArgs, SynthKind};
use crate::config::QaConfig;
use crate::error::CliError;
use crate::record::Context;

fn ingest_one(path: &Path, qa: &QaConfig, denoise: bool) -> Result<(AudioClip, Vec<QaFlag>), CliError> {
    let raw = decode_audio(path)?;
    let mut flags = detect_cutoffs(&raw, qa.cutoff_params(raw.sample_rate()));
    flags.extend(detect_bias(&raw, qa.bias_tolerance));
    let mut clip = remove_dc_bias(&average_channels(&raw));
    if denoise {
        let (clean, transients) = denoise_transients_flagged(&clip, qa.denoise)?;
        clip = clean;
        flags.extend(transients);
    }
    flags.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
    Ok((clip, flags))
}

pub fn ingest(args: &IngestArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let files = list_wavs(&args.input)?;
    make_dir(&args.out)?;
    let targets: Vec<PathBuf> = files.iter().map(|f| args.out.join(format!("{}.wav", stem(f)))).collect();
    for (src, dst) in files.iter().zip(&targets) {
        if dst.exists() && same_file(src, dst) {
            return Err(CliError::Usage(format!("{} would overwrite its own input", dst.display())));
        }
    }
    let qa = ctx.config.qa;
    let results: Vec<Result<(AudioClip, Vec<QaFlag>), CliError>> =
        files.par_iter().map(|f| ingest_one(f, &qa, args.denoise)).collect();

    let qa_path = args.out.join("qa.jsonl");
    let mut qa_out = create(&qa_path)?;
    let mut n_flags = 0;
    for ((src, dst), result) in files.iter().zip(&targets).zip(results) {
        let (clip, flags) = result?;
        ctx.input(src);
        write_wav(&clip, dst, args.bits.into())?;
        write_flags_jsonl(&mut qa_out, &stem(src), &flags).map_err(CliError::io(&qa_path))?;
        n_flags += flags.len();
        ctx.output(dst);
    }
    qa_out.flush().map_err(CliError::io(&qa_path))?;
    ctx.output(&qa_path);
    summary(serde_json::json!({ "files": files.len(), "flags": n_flags }));
    Ok(args.out.join("run.json"))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn preprocess(args: &PreprocessArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let clip = decode_audio(&args.input)?;
    ctx.input(&args.input);
    make_parent(&args.out)?;
    let curve = match &args.curve_in {
        Some(path) => {
            ctx.input(path);
            Some(WhiteningCurve::read_csv(open(path)?)?)
        }
        None => None,
    };
    if args.curve_out.is_some() && curve.is_none() && ctx.config.preprocess.whitening.is_none() {
        return Err(CliError::Usage("--curve-out needs whitening enabled or --curve-in".into()));
    }
    let (clean, applied) = preprocess_with_curve(&clip, &ctx.config.preprocess, curve.as_ref())?;
    write_wav(&clean, &args.out, args.bits.into())?;
    ctx.output(&args.out);
    if let (Some(path), Some(c)) = (&args.curve_out, applied) {
        let mut out = create(path)?;
        c.write_csv(&mut out).and_then(|_| out.flush()).map_err(CliError::io(path))?;
        ctx.output(path);
    }
    summary(serde_json::json!({ "samples": clean.len(), "sample_rate": clean.sample_rate() }));
    Ok(sidecar(&args.out))
}

pub fn synth(args: &SynthArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let seed = ctx.config.seed;
    make_parent(&args.out)?;
    let signal = |kind| SynthSpec {
        kind,
        f0_hz: args.f0,
        f1_hz: args.f1,
        amplitude: args.amplitude,
        duration_s: args.dur.unwrap_or(1.0),
        sample_rate: args.rate,
        seed,
    };
    let id = stem(&args.out);
    let clip = match args.kind {
        SynthKind::Chirp => synthesize(&signal(SignalKind::LinearChirp))?,
        SynthKind::Sine => synthesize(&signal(SignalKind::Sine))?,
        SynthKind::Noise => synthesize(&signal(SignalKind::WhiteNoise))?,
        SynthKind::Scene => {
            let spec = SceneSpec {
                duration_s: args.dur.unwrap_or(60.0),
                sample_rate: args.rate,
                n_chirps: args.n_chirps,
                f0_hz: args.f0,
                f1_hz: args.f1,
                min_chirp_s: args.min_chirp,
                max_chirp_s: args.max_chirp,
                snr_db: args.snr_db,
                noise_std: args.noise_std,
                seed,
            };
            let scene = synthesize_scene(&spec, &id)?;
            let manifest_path = args.manifest.clone().unwrap_or_else(|| args.out.with_extension("jsonl"));
            write_wav(&scene.clip, &args.out, args.bits.into())?;
            make_parent(&manifest_path)?;
            let entry = ManifestEntry {
                file_id: id.clone(),
                path: path_from(&manifest_path, &args.out)?,
                record_date: args.date,
                annotations: scene.whistles,
            };
            let manifest = Manifest::new(vec![entry])?;
            let mut out = create(&manifest_path)?;
            manifest.write_jsonl(&mut out)?;
            out.flush().map_err(CliError::io(&manifest_path))?;
            ctx.output(&args.out);
            ctx.output(&manifest_path);
            summary(serde_json::json!({ "duration_s": scene.clip.duration_s(), "whistles": spec.n_chirps }));
            return Ok(sidecar(&args.out));
        }
    };
    write_wav(&clip.with_source_id(id), &args.out, args.bits.into())?;
    ctx.output(&args.out);
    summary(serde_json::json!({ "duration_s": args.dur.unwrap_or(1.0) }));
    Ok(sidecar(&args.out))
}

fn make_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => make_dir(dir),
        None => Ok(()),
    }
}

/// Path of `target` as written in a manifest stored at `manifest`: the bare
/// file name when both sit in one directory, otherwise absolute.
pub(crate) fn path_from(manifest: &Path, target: &Path) -> Result<PathBuf, CliError> {
    let dir = |p: &Path| -> Result<PathBuf, CliError> {
        let d = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        d.canonicalize().map_err(CliError::io(d))
    };
    let name = target.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", target.display())))?;
    let (m, t) = (dir(manifest)?, dir(target)?);
    Ok(if m == t { PathBuf::from(name) } else { t.join(name) })
}
