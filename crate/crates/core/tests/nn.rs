mod common;

use common::grad::{conv_geoms, geom, layer_suite, uniform, FLOOR, H};
use common::{central_diff, model_grad_error, rel_err};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use whistle_core::nn::layers::{self, ConvGeom};
use whistle_core::nn::{
    adam_step, backward, build_transfer_model, build_vanilla_cnn_with, forward, loss_bce, AdamState,
    LayerSpec, Mode, Model, ModelConfig, Padding, Tensor,
};


fn to32(x: &[f64]) -> Vec<f32> {
    x.iter().map(|&v| v as f32).collect()
}

/// Six nested loops over output position, output channel and kernel taps.
fn naive_conv(x: &[f64], w: &[f64], b: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.out_h * g.out_w * g.out_c];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for oc in 0..g.out_c {
                let mut acc = b[oc];
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        for c in 0..g.in_c {
                            let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                            let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                            if iy < 0 || ix < 0 || iy >= g.in_h as isize || ix >= g.in_w as isize {
                                continue;
                            }
                            acc += x[(iy as usize * g.in_w + ix as usize) * g.in_c + c] * w[((oc * g.kh + ky) * g.kw + kx) * g.in_c + c];
                        }
                    }
                }
                out[(oy * g.out_w + ox) * g.out_c + oc] = acc;
            }
        }
    }
    out
}

#[test]
fn conv_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in conv_geoms() {
        let x = uniform(&mut rng, g.in_h * g.in_w * g.in_c);
        let w = uniform(&mut rng, g.out_c * g.kh * g.kw * g.in_c);
        let b = uniform(&mut rng, g.out_c);
        let fast = layers::conv2d_forward(&to32(&x), &to32(&w), &to32(&b), &g);
        let slow = naive_conv(&x, &w, &b, &g);
        assert_eq!(fast.len(), slow.len());
        for (f, s) in fast.iter().zip(&slow) {
            assert!((*f as f64 - s).abs() < 1e-5, "{g:?}: {f} vs {s}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_output_shape_formula(h in 1usize..20, w in 1usize..20, k in 1usize..6, s in 1usize..4, same in any::<bool>()) {
        let padding = if same { Padding::Same } else { Padding::Valid };
        prop_assume!(same || (h >= k && w >= k));
        let g = geom(h, w, 1, 1, k, k, s, padding);
        let (eh, ew) = if same { (h.div_ceil(s), w.div_ceil(s)) } else { ((h - k) / s + 1, (w - k) / s + 1) };
        prop_assert_eq!((g.out_h, g.out_w), (eh, ew));
        let out = layers::conv2d_forward(&vec![1.0f64; h * w], &vec![1.0; k * k], &[0.0], &g);
        prop_assert_eq!(out.len(), eh * ew);
    }

    // the logit ranges keep every probability representably inside (0, 1)
    #[test]
    fn softmax_rows_are_distributions(z in prop::collection::vec(-15.0f64..15.0, 2..6)) {
        let p = layers::softmax_forward(&z);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn softmax_rows_are_distributions_32bit(z in prop::collection::vec(-7.0f32..7.0, 2..6)) {
        let p = layers::softmax_forward(&z);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!((p.iter().sum::<f32>() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn layer_gradients_32bit() {
    for (layer, worst) in layer_suite(true, 10) {
        assert!(worst <= 1e-3, "{layer}: {worst:e}");
    }
}

#[test]
fn layer_gradients_64bit() {
    for (layer, worst) in layer_suite(false, 10) {
        assert!(worst <= 1e-6, "{layer}: {worst:e}");
    }
}

#[test]
fn cross_entropy_gradient_matches_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = 3;
        let mut z = (0..batch * 2).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        let labels: Vec<f64> = (0..batch).flat_map(|b| if (b + seed as usize) % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
        let y = Tensor::new(vec![batch, 2], labels.clone()).unwrap();
        let loss = |z: &[f64]| {
            let probs: Vec<f64> = z.chunks(2).flat_map(layers::softmax_forward).collect();
            loss_bce(&Tensor::new(vec![batch, 2], probs).unwrap(), &y).0
        };
        let probs: Vec<f64> = z.chunks(2).flat_map(layers::softmax_forward).collect();
        let (_, grad) = loss_bce(&Tensor::new(vec![batch, 2], probs).unwrap(), &y);
        for i in 0..z.len() {
            let n = central_diff(&mut z, i, H, loss);
            assert!(rel_err(grad.data()[i], n, FLOOR) < 1e-4);
        }
    }
}

fn micro_model(seed: u64) -> Model<f32> {
    Model::new(build_vanilla_cnn_with([16, 16, 3], Padding::Same), seed).unwrap()
}

fn random_batch(seed: u64, batch: usize, side: usize) -> (Tensor<f32>, Tensor<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f32> = (0..batch * side * side * 3).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f32> = (0..batch).flat_map(|b| if b % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
    (Tensor::new(vec![batch, side, side, 3], x).unwrap(), Tensor::new(vec![batch, 2], y).unwrap())
}

#[test]
fn micro_cnn_gradients_64bit() {
    for seed in 0..2 {
        let model: Model<f64> = micro_model(seed).cast();
        let (x, y) = random_batch(seed, 2, 16);
        let err = model_grad_error(&model, &x.cast(), &y.cast(), seed, H, FLOOR).worst;
        assert!(err <= 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn backward_is_repeatable() {
    let model = micro_model(3);
    let (x, y) = random_batch(3, 4, 16);
    let out = forward(&model, &x, Mode::Train, 9).unwrap();
    let (_, g) = loss_bce(&out.probs, &y);
    assert_eq!(backward(&model, &out.cache, &g).unwrap(), backward(&model, &out.cache, &g).unwrap());
}

#[test]
fn inverted_dropout_keeps_the_mean() {
    let x: Vec<f64> = (1..=8).map(|i| i as f64 * 0.25).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut sum = vec![0.0; x.len()];
    let draws = 100_000;
    for _ in 0..draws {
        let (y, _) = layers::dropout_forward(&x, 0.2, &mut rng);
        sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
    }
    for (s, v) in sum.iter().zip(&x) {
        assert!((s / draws as f64 - v).abs() <= 0.02 * v, "{} vs {v}", s / draws as f64);
    }
}

#[test]
fn adam_runs_are_bit_identical() {
    let run = || {
        let mut model = micro_model(4);
        let mut opt = AdamState::new(&model, 1e-3);
        for step in 0..5 {
            let (x, y) = random_batch(step, 4, 16);
            let out = forward(&model, &x, Mode::Train, step).unwrap();
            let (_, g) = loss_bce(&out.probs, &y);
            let grads = backward(&model, &out.cache, &g).unwrap();
            adam_step(&mut model, &grads, &mut opt);
        }
        model
    };
    assert_eq!(run(), run());
}

fn tiny_backbone() -> ModelConfig {
    ModelConfig {
        input: [8, 8, 1],
        layers: vec![
            LayerSpec::Conv2d { out_channels: 2, kernel_h: 3, kernel_w: 3, stride: 1, padding: Padding::Valid, trainable: false },
            LayerSpec::Flatten,
        ],
    }
}

#[test]
fn transfer_model_trains_end_to_end() {
    let cfg = build_transfer_model(&tiny_backbone(), &[50, 20]).unwrap();
    let mut model: Model<f32> = Model::new(cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // class 1: bright left half; class 0: bright right half
    let batch = 16;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for b in 0..batch {
        let left = b % 2 == 1;
        for _r in 0..8 {
            for c in 0..8 {
                let on = (c < 4) == left;
                x.push(if on { 0.8 } else { 0.1 } + rng.random_range(0.0..0.1f32));
            }
        }
        y.extend(if left { [0.0, 1.0] } else { [1.0, 0.0] });
    }
    let (x, y) = (Tensor::new(vec![batch, 8, 8, 1], x).unwrap(), Tensor::new(vec![batch, 2], y).unwrap());

    let backbone_before = model.params()[0].clone();
    let mut opt = AdamState::new(&model, 1e-3);
    let mut losses = Vec::new();
    for step in 0..60 {
        let out = forward(&model, &x, Mode::Train, step).unwrap();
        let (loss, g) = loss_bce(&out.probs, &y);
        losses.push(loss);
        let grads = backward(&model, &out.cache, &g).unwrap();
        if step == 0 {
            let gw = grads.layers[0].as_ref().expect("backbone is trainable");
            assert!(gw.weight.data().iter().any(|&v| v != 0.0));
        }
        adam_step(&mut model, &grads, &mut opt);
    }
    assert!(losses[59] < 0.5 * losses[0], "{} → {}", losses[0], losses[59]);
    assert_ne!(model.params()[0], backbone_before);
}

#[test]
fn transfer_backbone_gradient_matches_differences() {
    let cfg = build_transfer_model(&tiny_backbone(), &[50, 20]).unwrap();
    let model: Model<f64> = Model::new(cfg, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Tensor::new(vec![2, 8, 8, 1], (0..128).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let y = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(model_grad_error(&model, &x, &y, 0, H, FLOOR).worst <= 1e-6);
}
