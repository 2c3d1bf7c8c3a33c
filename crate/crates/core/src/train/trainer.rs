use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, TrainError};
use crate::dataset::{ExampleIndex, Label};
use crate::nn::{adam_step, backward, forward, loss_bce, AdamState, Checkpoint, Mode, Model, Tensor, TrainingMetadata};

/// Images with labels, all of one `[height, width, channels]` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub shape: [usize; 3],
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<Label>,
}

impl LabeledSet {
    pub fn new(shape: [usize; 3], inputs: Vec<Vec<f32>>, labels: Vec<Label>) -> Result<Self, TrainError> {
        if inputs.len() != labels.len() {
            return Err(TrainError::LengthMismatch { inputs: inputs.len(), labels: labels.len() });
        }
        let len = shape.iter().product::<usize>();
        if let Some(bad) = inputs.iter().find(|x| x.len() != len) {
            return Err(TrainError::InputShape { expected: shape, found: vec![bad.len()] });
        }
        Ok(Self { shape, inputs, labels })
    }

    /// Pairs a cached example index with its loaded arrays.
    pub fn from_cache(index: &ExampleIndex, arrays: Vec<Vec<f32>>) -> Result<Self, TrainError> {
        Self::new(index.shape, arrays, index.examples.iter().map(|e| e.label).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            shape: self.shape,
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|l| l.is_whistle()) && self.labels.iter().any(|l| !l.is_whistle())
    }

    /// `[n, h, w, c]` inputs and one-hot `[n, 2]` targets for the given rows.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Tensor<f32>) {
        let [h, w, c] = self.shape;
        let mut x = Vec::with_capacity(indices.len() * h * w * c);
        let mut y = Vec::with_capacity(indices.len() * 2);
        for &i in indices {
            x.extend_from_slice(&self.inputs[i]);
            let mut onehot = [0.0; 2];
            onehot[self.labels[i].index()] = 1.0;
            y.extend_from_slice(&onehot);
        }
        (
            Tensor::new(vec![indices.len(), h, w, c], x).expect("batch shape"),
            Tensor::new(vec![indices.len(), 2], y).expect("label shape"),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::vanilla()
    }
}

impl TrainConfig {
    /// Settings for the CNN trained from scratch (learning rate 1e-4).
    pub fn vanilla() -> Self {
        Self { lr: 1e-4, batch_size: 32, max_epochs: 100, patience: 15, seed: 0 }
    }

    /// Settings for fine-tuning a pretrained backbone (learning rate 1e-5).
    pub fn transfer() -> Self {
        Self { lr: 1e-5, ..Self::vanilla() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.patience == 0 || self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("patience and batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Stops once the monitored loss has failed to strictly improve on its best
/// value for `patience` consecutive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, wait: 0 }
    }

    /// Records one loss; true when it is a new best.
    pub fn observe(&mut self, loss: f64) -> bool {
        let improved = loss.is_finite() && self.best.is_none_or(|b| loss < b);
        if improved {
            self.best = Some(loss);
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.wait >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Counted from 1.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub model: Model<f32>,
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

const EVAL_CHUNK: usize = 64;

/// Whistle-class probability for every example, in eval mode.
pub fn predict(model: &Model<f32>, set: &LabeledSet) -> Result<Vec<f64>, TrainError> {
    let mut scores = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, _) = set.batch(chunk);
        let out = forward(model, &x, Mode::Eval, 0)?;
        scores.extend((0..chunk.len()).map(|i| out.probs.row(i)[Label::Whistle.index()] as f64));
    }
    Ok(scores)
}

/// Mean cross-entropy and accuracy at threshold 0.5, in eval mode.
pub fn evaluate_set(model: &Model<f32>, set: &LabeledSet) -> Result<(f64, f64), TrainError> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = set.batch(chunk);
        let out = forward(model, &x, Mode::Eval, 0)?;
        let (loss, _) = loss_bce(&out.probs, &y);
        loss_sum += loss as f64 * chunk.len() as f64;
        for (i, &row) in chunk.iter().enumerate() {
            let whistle = out.probs.row(i)[Label::Whistle.index()] >= 0.5;
            correct += usize::from(whistle == set.labels[row].is_whistle());
        }
    }
    Ok((loss_sum / set.len() as f64, correct as f64 / set.len() as f64))
}

fn check_shape(model: &Model<f32>, set: &LabeledSet) -> Result<(), TrainError> {
    let expected = model.config().input;
    if set.shape != expected {
        return Err(TrainError::InputShape { expected, found: set.shape.to_vec() });
    }
    Ok(())
}

/// Adam over seeded shuffled mini-batches; the validation loss after each
/// epoch drives early stopping and the returned weights are the best seen.
pub fn train(model: Model<f32>, train_set: &LabeledSet, val_set: &LabeledSet, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    check_shape(&model, train_set)?;
    check_shape(&model, val_set)?;

    let mut model = model;
    let mut opt = AdamState::new(&model, config.lr);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = Vec::new();
    let mut best: Option<(usize, Checkpoint)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64, 0)));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.batch(chunk);
            let out = forward(&model, &x, Mode::Train, derive_seed(config.seed, epoch as u64, b as u64 + 1))?;
            let (loss, grad) = loss_bce(&out.probs, &y);
            let grads = backward(&model, &out.cache, &grad)?;
            adam_step(&mut model, &grads, &mut opt);
            loss_sum += loss as f64 * chunk.len() as f64;
        }
        let (val_loss, val_accuracy) = evaluate_set(&model, val_set)?;
        history.push(EpochRecord { epoch, train_loss: loss_sum / train_set.len() as f64, val_loss, val_accuracy });
        if stopper.observe(val_loss) {
            let meta = TrainingMetadata { epoch, best_val_loss: Some(val_loss), seed: config.seed };
            best = Some((epoch, Checkpoint::from_model(&model, Some(&opt), meta)));
        }
        if stopper.should_stop() {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    let (best_epoch, checkpoint) = best.ok_or(TrainError::Diverged)?;
    Ok(TrainOutcome { model: checkpoint.model()?, checkpoint, history, best_epoch, stopped_early })
}
