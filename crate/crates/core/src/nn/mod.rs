//! A small CNN engine: tensors, a fixed layer zoo with exact reverse-mode
//! gradients, the Adam optimizer and a binary checkpoint format.
//!
//! Everything is generic over the float type. Models are trained and stored
//! in `f32`; the `f64` instantiation exists for tight gradient checks.

mod adam;
mod checkpoint;
mod config;
pub mod layers;
mod model;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, NamedArray, TrainingMetadata, CHECKPOINT_VERSION};
pub use config::{build_transfer_model, build_vanilla_cnn, build_vanilla_cnn_with, build_vgg16_backbone, conv_axis, LayerSpec, ModelConfig, Padding};
pub use model::{backward, backward_with_input, forward, loss_bce, ForwardCache, ForwardOutput, Gradients, LayerParams, Mode, Model};

use std::fmt::Debug;

use thiserror::Error;

/// Float types the engine runs on.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Default + Debug + Send + Sync + std::iter::Sum + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer} ({kind}): {detail}")]
    Shape { layer: usize, kind: &'static str, detail: String },
    #[error("input shape {found:?} does not match model input {expected:?}")]
    InputShape { expected: Vec<usize>, found: Vec<usize> },
    #[error("model must end in softmax to produce probabilities")]
    NoSoftmax,
    #[error("cache was produced by model version {cache}, current version is {model}")]
    StaleCache { cache: u64, model: u64 },
    #[error("gradient shape {found:?} does not match output {expected:?}")]
    GradShape { expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("array {name}: checkpoint shape {found:?}, model expects {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() || shape.contains(&0) {
            return Err(NnError::InputShape { expected: shape, found: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` along the leading axis.
    pub fn row(&self, i: usize) -> &[T] {
        let n = self.data.len() / self.shape[0];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| U::from(v).unwrap()).collect() }
    }
}
