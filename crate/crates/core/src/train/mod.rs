//! Mini-batch training with early stopping, k-fold cross-validation and CNN
//! window scoring.

mod cv;
mod detect;
mod trainer;

pub use cv::{cross_validate, score_metrics, CvOutcome, FoldOutcome, Prediction};
pub use detect::{score_windows, windows_to_events};
pub use trainer::{evaluate_set, predict, train, EarlyStopping, EpochRecord, LabeledSet, TrainConfig, TrainOutcome};

use thiserror::Error;

use crate::eval::EvalError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("examples have shape {found:?}, model expects {expected:?}")]
    InputShape { expected: [usize; 3], found: Vec<usize> },
    #[error("{inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },
    #[error("fold {fold} has only one class in its {part} part")]
    SingleClassFold { fold: usize, part: &'static str },
    #[error("fold assignment covers {assigned} items, set has {items}")]
    FoldSize { assigned: usize, items: usize },
    #[error("validation loss was never finite")]
    Diverged,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Derives independent stream seeds from a run seed and positions.
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
