//! Run records: enough to replay a command exactly.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub checkpoint_format: u32,
    pub subcommand: &'a str,
    pub argv: &'a [String],
    pub threads: usize,
    pub config: &'a PipelineConfig,
    pub config_fingerprint: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

/// Collects inputs and outputs while a command runs.
pub struct Context {
    pub config: PipelineConfig,
    pub argv: Vec<String>,
    pub threads: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Context {
    pub fn new(config: PipelineConfig, argv: Vec<String>, threads: usize) -> Self {
        Self { config, argv, threads, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: impl AsRef<Path>) {
        self.inputs.push(path.as_ref().to_path_buf());
    }

    pub fn output(&mut self, path: impl AsRef<Path>) {
        self.outputs.push(path.as_ref().to_path_buf());
    }

    pub fn write_record(&self, subcommand: &str, path: &Path) -> Result<(), CliError> {
        let mut inputs = Vec::new();
        for p in &self.inputs {
            digest_into(p, &mut inputs)?;
        }
        let record = RunRecord {
            tool: "whistle",
            version: env!("CARGO_PKG_VERSION"),
            core_version: whistle_core::VERSION,
            checkpoint_format: whistle_core::nn::CHECKPOINT_VERSION,
            subcommand,
            argv: &self.argv,
            threads: self.threads,
            config: &self.config,
            config_fingerprint: whistle_core::eval::EvalReport::fingerprint(&self.config),
            inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        let mut json = serde_json::to_string_pretty(&record).expect("run record serializes");
        json.push('\n');
        fs::write(path, json).map_err(CliError::io(path))
    }
}

/// Files digest directly; directories contribute every regular file below
/// them in path order.
fn digest_into(path: &Path, out: &mut Vec<InputDigest>) -> Result<(), CliError> {
    let meta = fs::metadata(path).map_err(CliError::io(path))?;
    if meta.is_dir() {
        let mut children: Vec<PathBuf> = fs::read_dir(path)
            .map_err(CliError::io(path))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(CliError::io(path))?;
        children.sort();
        for child in children {
            digest_into(&child, out)?;
        }
        return Ok(());
    }
    let (bytes, sha256) = sha256_file(path)?;
    out.push(InputDigest { path: path.display().to_string(), bytes, sha256 });
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<(u64, String), CliError> {
    let mut file = fs::File::open(path).map_err(CliError::io(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(CliError::io(path))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    let hex = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok((total, hex))
}
