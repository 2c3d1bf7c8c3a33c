use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{conv_axis, LayerSpec, ModelConfig};
use super::layers::{self, ConvGeom};
use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// A model configuration with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar = f32> {
    config: ModelConfig,
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<LayerParams<T>>>,
    version: u64,
}

/// Per-example intermediate state kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Saved<T> {
    Input(Vec<T>),
    Pool { argmax: Vec<usize>, input_len: usize },
    Mask(Vec<T>),
    Nothing,
}

/// State recorded by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    version: u64,
    saved: Vec<Vec<Saved<T>>>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// `[batch, classes]`.
    pub probs: Tensor<T>,
    /// Softmax inputs, `[batch, classes]`.
    pub logits: Tensor<T>,
    pub cache: ForwardCache<T>,
}

/// Gradients aligned with the model layers; `None` for layers without
/// parameters and for frozen layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

/// Mixes the forward seed with example and layer positions so dropout masks
/// do not depend on how examples are scheduled.
fn mask_seed(seed: u64, example: usize, layer: usize) -> u64 {
    let mut z = seed ^ (example as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (layer as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Scalar> Model<T> {
    /// He-style initialization: weights uniform in `±sqrt(6 / fan_in)`,
    /// biases zero.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        let shapes = config.shape_chain()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .param_shapes()?
            .into_iter()
            .map(|p| {
                p.map(|(w, b)| {
                    let fan_in: usize = w.iter().product::<usize>() / w[if w.len() == 4 { 0 } else { 1 }];
                    let limit = (6.0 / fan_in as f64).sqrt();
                    let n = w.iter().product();
                    let data = (0..n).map(|_| T::from(rng.random_range(-limit..limit)).unwrap()).collect();
                    LayerParams { weight: Tensor { shape: w, data }, bias: Tensor::zeros(b) }
                })
            })
            .collect();
        Ok(Self { config, shapes, params, version: 0 })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn params(&self) -> &[Option<LayerParams<T>>] {
        &self.params
    }

    /// Mutable access bumps the version, invalidating earlier caches.
    pub fn params_mut(&mut self) -> &mut [Option<LayerParams<T>>] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Names of every weight array, `layer{i}.weight` / `layer{i}.bias`.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            if let Some(p) = p {
                out.push((format!("layer{i}.weight"), &p.weight));
                out.push((format!("layer{i}.bias"), &p.bias));
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            shapes: self.shapes.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.as_ref().map(|p| LayerParams { weight: p.weight.cast(), bias: p.bias.cast() }))
                .collect(),
            version: self.version,
        }
    }

    fn geom(&self, layer: usize) -> ConvGeom {
        let LayerSpec::Conv2d { out_channels, kernel_h, kernel_w, stride, padding, .. } = self.config.layers[layer] else {
            unreachable!("not a conv layer")
        };
        let (i, o) = (&self.shapes[layer], &self.shapes[layer + 1]);
        ConvGeom {
            in_h: i[0],
            in_w: i[1],
            in_c: i[2],
            out_h: o[0],
            out_w: o[1],
            out_c: out_channels,
            kh: kernel_h,
            kw: kernel_w,
            stride,
            pad_top: conv_axis(i[0], kernel_h, stride, padding).unwrap().1,
            pad_left: conv_axis(i[1], kernel_w, stride, padding).unwrap().1,
        }
    }

    /// Runs layers `from..to` on one example. Returns the output and, when
    /// `keep` is set, what backward needs for each layer.
    pub(crate) fn run_layers(
        &self,
        mut x: Vec<T>,
        from: usize,
        to: usize,
        mode: Mode,
        seed: u64,
        example: usize,
        keep: bool,
    ) -> (Vec<T>, Vec<Saved<T>>) {
        let mut saved = Vec::new();
        for i in from..to {
            let (y, s) = match self.config.layers[i] {
                LayerSpec::Conv2d { .. } => {
                    let p = self.params[i].as_ref().unwrap();
                    let y = layers::conv2d_forward(&x, p.weight.data(), p.bias.data(), &self.geom(i));
                    (y, Saved::Input(x))
                }
                LayerSpec::Dense { .. } => {
                    let p = self.params[i].as_ref().unwrap();
                    let y = layers::dense_forward(&x, p.weight.data(), p.bias.data());
                    (y, Saved::Input(x))
                }
                LayerSpec::MaxPool { size } => {
                    let s = &self.shapes[i];
                    let (y, argmax) = layers::maxpool_forward(&x, [s[0], s[1], s[2]], size);
                    (y, Saved::Pool { argmax, input_len: x.len() })
                }
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Eval => (x, Saved::Nothing),
                    Mode::Train => {
                        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed(seed, example, i));
                        let (y, mask) = layers::dropout_forward(&x, rate, &mut rng);
                        (y, Saved::Mask(mask))
                    }
                },
                LayerSpec::Flatten => (x, Saved::Nothing),
                LayerSpec::Relu => (layers::relu_forward(&x), Saved::Input(x)),
                LayerSpec::Softmax => (layers::softmax_forward(&x), Saved::Nothing),
            };
            if keep {
                saved.push(s);
            }
            x = y;
        }
        (x, saved)
    }

    /// Runs layers `from..to` on a single example's activation, with the
    /// same dropout masks [`forward`] would draw for `(seed, example)`.
    pub fn run_range(&self, x: Vec<T>, from: usize, to: usize, mode: Mode, seed: u64, example: usize) -> Vec<T> {
        self.run_layers(x, from, to, mode, seed, example, false).0
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize, NnError> {
        let expected = &self.shapes[0];
        if input.shape().len() != 4 || input.shape()[1..] != expected[..] {
            let mut want = vec![0];
            want.extend_from_slice(expected);
            return Err(NnError::InputShape { expected: want, found: input.shape().to_vec() });
        }
        Ok(input.shape()[0])
    }

    /// Backward for one example starting from the gradient at the softmax
    /// input. Frozen layers get no parameter gradient.
    fn backward_example(&self, saved: &[Saved<T>], grad_logits: &[T], want_input: bool) -> (Vec<Option<LayerParams<T>>>, Option<Vec<T>>) {
        let n = self.config.layers.len();
        let mut grads: Vec<Option<LayerParams<T>>> = vec![None; n];
        let mut g = grad_logits.to_vec();
        // the last layer is softmax; its gradient was folded into grad_logits
        for i in (0..n - 1).rev() {
            let need_dx = want_input || i > 0;
            let layer = &self.config.layers[i];
            g = match (layer, &saved[i]) {
                (LayerSpec::Conv2d { trainable, .. }, Saved::Input(x)) => {
                    let p = self.params[i].as_ref().unwrap();
                    let (dw, db, dx) = layers::conv2d_backward(x, p.weight.data(), &g, &self.geom(i), need_dx);
                    if *trainable {
                        grads[i] = Some(LayerParams {
                            weight: Tensor { shape: p.weight.shape.clone(), data: dw },
                            bias: Tensor { shape: p.bias.shape.clone(), data: db },
                        });
                    }
                    dx.unwrap_or_default()
                }
                (LayerSpec::Dense { trainable, .. }, Saved::Input(x)) => {
                    let p = self.params[i].as_ref().unwrap();
                    let (dw, db, dx) = layers::dense_backward(x, p.weight.data(), &g, need_dx);
                    if *trainable {
                        grads[i] = Some(LayerParams {
                            weight: Tensor { shape: p.weight.shape.clone(), data: dw },
                            bias: Tensor { shape: p.bias.shape.clone(), data: db },
                        });
                    }
                    dx.unwrap_or_default()
                }
                (LayerSpec::MaxPool { .. }, Saved::Pool { argmax, input_len }) => layers::maxpool_backward(&g, argmax, *input_len),
                (LayerSpec::Dropout { .. }, Saved::Mask(mask)) => layers::dropout_backward(mask, &g),
                (LayerSpec::Relu, Saved::Input(x)) => layers::relu_backward(x, &g),
                (LayerSpec::Dropout { .. } | LayerSpec::Flatten, Saved::Nothing) => g,
                _ => unreachable!("cache does not match layer {i}"),
            };
        }
        (grads, want_input.then_some(g))
    }
}

/// Batched forward pass over `[batch, h, w, c]` input. Dropout masks are
/// drawn from `seed` in train mode; eval mode is deterministic.
pub fn forward<T: Scalar>(model: &Model<T>, input: &Tensor<T>, mode: Mode, seed: u64) -> Result<ForwardOutput<T>, NnError> {
    if !matches!(model.config.layers.last(), Some(LayerSpec::Softmax)) {
        return Err(NnError::NoSoftmax);
    }
    let batch = model.check_input(input)?;
    let n = model.config.layers.len();
    let per_example: Vec<(Vec<T>, Vec<Saved<T>>)> = (0..batch)
        .into_par_iter()
        .map(|b| model.run_layers(input.row(b).to_vec(), 0, n - 1, mode, seed, b, true))
        .collect();
    let classes = model.shapes[n][0];
    let mut logits = Vec::with_capacity(batch * classes);
    let mut saved = Vec::with_capacity(batch);
    for (z, s) in per_example {
        logits.extend_from_slice(&z);
        saved.push(s);
    }
    let probs: Vec<T> = logits.chunks(classes).flat_map(layers::softmax_forward).collect();
    Ok(ForwardOutput {
        probs: Tensor { shape: vec![batch, classes], data: probs },
        logits: Tensor { shape: vec![batch, classes], data: logits },
        cache: ForwardCache { version: model.version, saved },
    })
}

fn backward_impl<T: Scalar>(
    model: &Model<T>,
    cache: &ForwardCache<T>,
    grad_logits: &Tensor<T>,
    want_input: bool,
) -> Result<(Gradients<T>, Option<Tensor<T>>), NnError> {
    if cache.version != model.version {
        return Err(NnError::StaleCache { cache: cache.version, model: model.version });
    }
    let batch = cache.saved.len();
    let classes = model.shapes.last().unwrap()[0];
    if grad_logits.shape() != [batch, classes] {
        return Err(NnError::GradShape { expected: vec![batch, classes], found: grad_logits.shape().to_vec() });
    }
    let per_example: Vec<_> = (0..batch)
        .into_par_iter()
        .map(|b| model.backward_example(&cache.saved[b], grad_logits.row(b), want_input))
        .collect();
    // fixed-order reduction keeps results independent of the thread count
    let mut total: Vec<Option<LayerParams<T>>> = vec![None; model.config.layers.len()];
    let mut input_grad = Vec::new();
    for (grads, dx) in per_example {
        for (acc, g) in total.iter_mut().zip(grads) {
            match (acc.as_mut(), g) {
                (None, Some(g)) => *acc = Some(g),
                (Some(a), Some(g)) => {
                    a.weight.data.iter_mut().zip(&g.weight.data).for_each(|(x, &y)| *x += y);
                    a.bias.data.iter_mut().zip(&g.bias.data).for_each(|(x, &y)| *x += y);
                }
                _ => {}
            }
        }
        if let Some(dx) = dx {
            input_grad.extend(dx);
        }
    }
    let input_grad = want_input.then(|| {
        let mut shape = vec![batch];
        shape.extend_from_slice(&model.shapes[0]);
        Tensor { shape, data: input_grad }
    });
    Ok((Gradients { layers: total }, input_grad))
}

/// Reverse-mode gradients of the loss with respect to every trainable
/// weight, given the gradient at the softmax input (see [`loss_bce`]).
pub fn backward<T: Scalar>(model: &Model<T>, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>, NnError> {
    backward_impl(model, cache, grad_logits, false).map(|(g, _)| g)
}

/// [`backward`] plus the gradient with respect to the input batch.
pub fn backward_with_input<T: Scalar>(
    model: &Model<T>,
    cache: &ForwardCache<T>,
    grad_logits: &Tensor<T>,
) -> Result<(Gradients<T>, Tensor<T>), NnError> {
    backward_impl(model, cache, grad_logits, true).map(|(g, dx)| (g, dx.unwrap()))
}

/// Two-class cross-entropy averaged over the batch, with probabilities
/// clamped at 1e-12. The returned gradient is with respect to the softmax
/// inputs: `(probs − labels) / batch`.
pub fn loss_bce<T: Scalar>(probs: &Tensor<T>, labels: &Tensor<T>) -> (T, Tensor<T>) {
    assert_eq!(probs.shape(), labels.shape(), "probs and labels must have the same shape");
    let batch = T::from(probs.shape()[0]).unwrap();
    let eps = T::from(1e-12).unwrap();
    let loss = probs.data.iter().zip(&labels.data).map(|(&p, &y)| -y * p.max(eps).ln()).sum::<T>() / batch;
    let grad = probs.data.iter().zip(&labels.data).map(|(&p, &y)| (p - y) / batch).collect();
    (loss, Tensor { shape: probs.shape.clone(), data: grad })
}
