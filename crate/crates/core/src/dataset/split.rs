//! Date-range train/test split and stratified k-fold assignment.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Label, Manifest, ManifestEntry};

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, DatasetError> {
        if start > end {
            return Err(DatasetError::InvalidSplit(format!("{start} is after {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DateSplit {
    pub train: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    /// Files dated outside both ranges.
    pub excluded: Vec<String>,
}

pub fn split_by_date(manifest: &Manifest, train: DateRange, test: DateRange) -> Result<DateSplit, DatasetError> {
    if train.overlaps(&test) {
        return Err(DatasetError::InvalidSplit(format!(
            "train {}..{} overlaps test {}..{}",
            train.start, train.end, test.start, test.end
        )));
    }
    let mut split = DateSplit { train: Vec::new(), test: Vec::new(), excluded: Vec::new() };
    for e in &manifest.entries {
        if train.contains(e.record_date) {
            split.train.push(e.clone());
        } else if test.contains(e.record_date) {
            split.test.push(e.clone());
        } else {
            split.excluded.push(e.file_id.clone());
        }
    }
    Ok(split)
}

/// Fold index for every item, aligned with the labels it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// With `k = 1` the single fold trains on everything.
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        if self.k == 1 {
            return (0..self.folds.len()).collect();
        }
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Stratified k-fold: each class is shuffled with the seeded generator and
/// dealt round-robin, the dealing position carrying over from one class to
/// the next so fold sizes stay within one of each other. A class smaller than
/// `k` leaves some folds without it; training on such a fold is rejected later.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k == 0 {
        return Err(DatasetError::InvalidSplit("k must be at least 1".into()));
    }
    if labels.len() < k {
        return Err(DatasetError::TooFewItems { count: labels.len(), k });
    }
    let mut folds = vec![0; labels.len()];
    if k == 1 {
        return Ok(FoldAssignment { k, folds });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = 0;
    for class in [Label::Noise, Label::Whistle] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, folds })
}
