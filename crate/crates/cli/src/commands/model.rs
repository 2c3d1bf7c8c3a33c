use std::io::Write;
use std::path::{Path, PathBuf};

use whistle_core::dataset::{load_example_set, stratified_kfold};
use whistle_core::eval::{emit_report, EvalReport};
use whistle_core::nn::{build_vanilla_cnn_with, load_checkpoint, save_checkpoint, Checkpoint, Model, NnError};
use whistle_core::train::{cross_validate, predict, score_metrics, train as fit, LabeledSet};

use super::{create, make_dir, summary, ALL_FORMATS};
use crate::cli::TrainArgs;
use crate::config::Arch;
use crate::error::CliError;
use crate::record::Context;

/// Builds fresh models of the configured architecture.
struct Builder {
    arch: Arch,
    shape: [usize; 3],
    padding: whistle_core::nn::Padding,
    backbone: Option<Checkpoint>,
    keep_layers: Option<usize>,
    head_units: Vec<usize>,
}

impl Builder {
    fn build(&self, seed: u64) -> Result<Model<f32>, NnError> {
        match (&self.arch, &self.backbone) {
            (Arch::Vanilla, _) => Model::new(build_vanilla_cnn_with(self.shape, self.padding), seed),
            (Arch::Transfer, Some(ckpt)) => ckpt.transfer_model(self.keep_layers, &self.head_units, seed),
            (Arch::Transfer, None) => Err(NnError::InvalidConfig("transfer needs a backbone checkpoint".into())),
        }
    }
}

/// Independent model seed per cross-validation fold.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn train(args: &TrainArgs, ctx: &mut Context) -> Result<PathBuf, CliError> {
    let (index, arrays) = load_example_set(&args.cache)?;
    ctx.input(&args.cache);
    let set = LabeledSet::from_cache(&index, arrays)?;
    let config = ctx.config.clone();
    let folds = stratified_kfold(&set.labels, config.dataset.folds, config.seed)?;

    let backbone = match (&config.model.arch, &args.backbone) {
        (Arch::Transfer, Some(path)) => {
            ctx.input(path);
            let ckpt = load_checkpoint(path)?;
            if ckpt.config.input != set.shape {
                return Err(CliError::Input(format!(
                    "backbone takes {:?} inputs but the cache holds {:?}",
                    ckpt.config.input, set.shape
                )));
            }
            Some(ckpt)
        }
        (Arch::Transfer, None) => return Err(CliError::Usage("--arch transfer needs --backbone".into())),
        (Arch::Vanilla, Some(_)) => return Err(CliError::Usage("--backbone only applies to --arch transfer".into())),
        (Arch::Vanilla, None) => None,
    };
    let builder = Builder {
        arch: config.model.arch,
        shape: set.shape,
        padding: config.model.padding,
        backbone,
        keep_layers: config.model.keep_layers,
        head_units: config.model.head_units.clone(),
    };
    let train_config = config.train_config();
    let fingerprint = EvalReport::fingerprint(&config);
    make_dir(&args.out)?;

    // fold 0 validates, the rest train
    let train_set = set.subset(&folds.training_indices(0));
    let val_set = set.subset(&folds.validation_indices(0));
    let outcome = fit(builder.build(config.seed)?, &train_set, &val_set, &train_config)?;
    let ckpt_path = args.out.join("model.ckpt");
    save_checkpoint(&outcome.checkpoint, &ckpt_path)?;
    ctx.output(&ckpt_path);

    let history_path = args.out.join("history.json");
    let history = serde_json::json!({
        "train_examples": train_set.len(),
        "validation_examples": val_set.len(),
        "best_epoch": outcome.best_epoch,
        "stopped_early": outcome.stopped_early,
        "epochs": outcome.history,
    });
    write_json(&history_path, &history)?;
    ctx.output(&history_path);

    let scores = predict(&outcome.model, &val_set)?;
    let (metrics, roc) = score_metrics(&val_set.labels, &scores)?;
    let report = EvalReport::new("validation", metrics, Some(roc), Vec::new(), fingerprint.clone());
    let val_dir = args.out.join("validation");
    emit_report(&report, &val_dir, &ALL_FORMATS)?;
    ctx.output(&val_dir);
    let mut result = serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "validation_accuracy": metrics.accuracy.value(),
        "validation_auc": report.roc.as_ref().map(|r| r.auc),
    });

    if args.cv {
        let cv = cross_validate(|fold| builder.build(fold_seed(config.seed, fold)), &set, &folds, &train_config)?;
        let mut pooled: Vec<_> = cv.folds.iter().flat_map(|f| f.predictions.iter().cloned()).collect();
        pooled.sort_by_key(|p| p.index);
        let labels: Vec<_> = pooled.iter().map(|p| p.label).collect();
        let scores: Vec<f64> = pooled.iter().map(|p| p.score).collect();
        let (metrics, roc) = score_metrics(&labels, &scores)?;
        let summaries = cv.folds.iter().map(|f| f.summary()).collect();
        let report = EvalReport::new("cross-validation", metrics, Some(roc), summaries, fingerprint);
        let cv_dir = args.out.join("cv");
        emit_report(&report, &cv_dir, &ALL_FORMATS)?;
        ctx.output(&cv_dir);
        result["cv_mean_accuracy"] = serde_json::json!(cv.mean_accuracy);
    }
    summary(result);
    Ok(args.out.join("run.json"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).expect("json serializes");
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(CliError::io(path))
}
