//! Annotations, manifests, duration outlier removal, date splits, stratified
//! folds, contour quality checks and the on-disk example cache.

mod annotation;
pub mod cache;
mod contour;
mod split;
mod tukey;

pub use annotation::{Annotation, ContourPoint, Label, Manifest, ManifestEntry};
pub use cache::{build_example_set, load_example_set, window_label, BuildReport, CachedExample, ExampleConfig, ExampleIndex};
pub use contour::{contour_qa, population_variance, ContourQa, ContourQaParams};
pub use split::{split_by_date, stratified_kfold, DateRange, DateSplit, FoldAssignment};
pub use tukey::{quantile_sorted, tukey_duration_filter, TukeyResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("duplicate file id {0}")]
    DuplicateFileId(String),
    #[error("invalid annotation in {file_id}: {detail}")]
    InvalidAnnotation { file_id: String, detail: String },
    #[error("need at least 4 whistle annotations for quartiles, got {0}")]
    TooFewWhistles(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{count} items cannot fill {k} folds")]
    TooFewItems { count: usize, k: usize },
    #[error("corrupt cache: {0}")]
    CorruptCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
