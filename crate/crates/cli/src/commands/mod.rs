mod audio;
mod data;
mod detect;
mod eval;
mod model;

pub use audio::{ingest, preprocess, synth};
pub use data::{label_qa, spectrify, split};
pub use detect::detect;
pub use eval::{evaluate, report};
pub use model::train;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub(crate) const ALL_FORMATS: [whistle_core::eval::ReportFormat; 3] =
    [whistle_core::eval::ReportFormat::Json, whistle_core::eval::ReportFormat::Csv, whistle_core::eval::ReportFormat::Svg];

/// A file, or the `.wav` files directly inside a directory, sorted by name.
pub(crate) fn list_wavs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let meta = fs::metadata(input).map_err(CliError::io(input))?;
    if !meta.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).map_err(CliError::io(input))? {
        let path = entry.map_err(CliError::io(input))?.path();
        let is_wav = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no .wav files", input.display())));
    }
    Ok(files)
}

pub(crate) fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(CliError::io(path))?))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    Ok(BufReader::new(fs::File::open(path).map_err(CliError::io(path))?))
}

pub(crate) fn make_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

/// `<out>.run.json` next to a single output file.
pub(crate) fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

/// One JSON line on stdout for scripts.
pub(crate) fn summary(value: serde_json::Value) {
    println!("{value}");
}

/// Directory manifest paths are resolved against.
pub(crate) fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub(crate) fn read_manifest(path: &Path) -> Result<whistle_core::dataset::Manifest, CliError> {
    Ok(whistle_core::dataset::Manifest::read_jsonl(open(path)?)?)
}
