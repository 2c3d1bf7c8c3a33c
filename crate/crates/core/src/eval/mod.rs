//! Detection metrics: confusion counts, ROC curves, event matching and the
//! report files written for an evaluation run.

mod matching;
mod metrics;
mod report;
mod roc;

pub use matching::{match_by_file, match_detections, MatchResult};
pub use metrics::{confusion_and_metrics, ConfusionMatrix, Metric, Metrics};
pub use report::{emit_report, EvalReport, FoldSummary, ReportFormat, REPORT_FILES};
pub use roc::{roc_and_auc, RocCurve, RocPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what}: {left} vs {right} items")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("ROC needs both classes, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score {index} is not a finite number")]
    NonFiniteScore { index: usize },
    #[error("cannot write report to {path}: {source}")]
    Write { path: String, source: std::io::Error },
}
