use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict, train, EpochRecord, LabeledSet, TrainConfig, TrainError};
use crate::dataset::{FoldAssignment, Label};
use crate::eval::{confusion_and_metrics, roc_and_auc, FoldSummary, Metrics, RocCurve};
use crate::nn::{Model, NnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Position in the full labeled set.
    pub index: usize,
    pub label: Label,
    /// Whistle-class probability.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub predictions: Vec<Prediction>,
    pub metrics: Metrics,
    pub roc: RocCurve,
}

impl FoldOutcome {
    pub fn summary(&self) -> FoldSummary {
        FoldSummary {
            fold: self.fold,
            metrics: self.metrics,
            auc: Some(self.roc.auc),
            best_epoch: Some(self.best_epoch),
            best_val_loss: self.history.get(self.best_epoch - 1).map(|h| h.val_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: Vec<FoldOutcome>,
    pub mean_accuracy: f64,
}

/// Scores to metrics at threshold 0.5 plus the ROC curve.
pub fn score_metrics(labels: &[Label], scores: &[f64]) -> Result<(Metrics, RocCurve), TrainError> {
    let truth: Vec<bool> = labels.iter().map(|l| l.is_whistle()).collect();
    let calls: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
    Ok((confusion_and_metrics(&truth, &calls)?, roc_and_auc(scores, &truth)?))
}

/// Trains one model per fold on the other folds and validates on the fold
/// itself. Folds run concurrently; each gets a fresh model from `build` and
/// the same training configuration, so results depend only on the inputs.
pub fn cross_validate<F>(build: F, set: &LabeledSet, folds: &FoldAssignment, config: &TrainConfig) -> Result<CvOutcome, TrainError>
where
    F: Fn(usize) -> Result<Model<f32>, NnError> + Sync,
{
    if folds.folds.len() != set.len() {
        return Err(TrainError::FoldSize { assigned: folds.folds.len(), items: set.len() });
    }
    let parts: Vec<(Vec<usize>, Vec<usize>)> =
        (0..folds.k).map(|f| (folds.training_indices(f), folds.validation_indices(f))).collect();
    for (fold, (tr, va)) in parts.iter().enumerate() {
        for (idx, part) in [(tr, "training"), (va, "validation")] {
            if !set.subset(idx).has_both_classes() {
                return Err(TrainError::SingleClassFold { fold, part });
            }
        }
    }
    let outcomes: Result<Vec<FoldOutcome>, TrainError> = parts
        .par_iter()
        .enumerate()
        .map(|(fold, (tr, va))| {
            let val_set = set.subset(va);
            let trained = train(build(fold)?, &set.subset(tr), &val_set, config)?;
            let scores = predict(&trained.model, &val_set)?;
            let (metrics, roc) = score_metrics(&val_set.labels, &scores)?;
            let predictions = va
                .iter()
                .zip(&scores)
                .map(|(&index, &score)| Prediction { index, label: set.labels[index], score })
                .collect();
            Ok(FoldOutcome { fold, history: trained.history, best_epoch: trained.best_epoch, predictions, metrics, roc })
        })
        .collect();
    let folds = outcomes?;
    let mean_accuracy = folds.iter().map(|f| f.metrics.accuracy.value().unwrap_or(0.0)).sum::<f64>() / folds.len() as f64;
    Ok(CvOutcome { folds, mean_accuracy })
}
