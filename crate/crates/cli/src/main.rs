//! `whistle`: batch front end for the whistle detection toolkit.
//!
//! Every subcommand writes its outputs plus a JSON run record holding the
//! fully resolved configuration and digests of the inputs. Failures print
//! `{"error":{"kind","message"}}` on stderr and exit 1, or 2 for usage and
//! configuration errors.

mod cli;
mod commands;
mod config;
mod error;
mod record;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use config::PipelineConfig;
use error::CliError;
use record::Context;

/// Flags win over the config file and `--set`.
fn apply_flags(config: &mut PipelineConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Train(a) => {
            if let Some(arch) = a.arch {
                config.model.arch = arch;
            }
            if let Some(k) = a.folds {
                config.dataset.folds = k;
            }
        }
        Command::Evaluate(a) => {
            if let Some(f) = a.min_overlap {
                config.evaluation.min_overlap_fraction = f;
            }
        }
        _ => {}
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let mut config = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    apply_flags(&mut config, &cli);
    let config = config.resolve()?;

    let mut ctx = Context::new(config, std::env::args().collect(), rayon::current_num_threads());
    if let Some(path) = &cli.config {
        ctx.input(path);
    }
    let default_record = match &cli.command {
        Command::Ingest(a) => commands::ingest(a, &mut ctx)?,
        Command::Preprocess(a) => commands::preprocess(a, &mut ctx)?,
        Command::Spectrify(a) => commands::spectrify(a, &mut ctx)?,
        Command::LabelQa(a) => commands::label_qa(a, &mut ctx)?,
        Command::Split(a) => commands::split(a, &mut ctx)?,
        Command::Train(a) => commands::train(a, &mut ctx)?,
        Command::Detect(a) => commands::detect(a, &mut ctx)?,
        Command::Evaluate(a) => commands::evaluate(a, &mut ctx)?,
        Command::Report(a) => commands::report(a, &mut ctx)?,
        Command::Synth(a) => commands::synth(a, &mut ctx)?,
    };
    let record = cli.run_record.clone().unwrap_or(default_record);
    ctx.write_record(cli.command.name(), &record)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version exit 0, malformed flags exit 2
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
