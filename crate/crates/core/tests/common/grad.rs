//! Finite-difference gradient checks for the layer kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use whistle_core::nn::layers::{self, ConvGeom};
use whistle_core::nn::{conv_axis, Padding, Scalar};

use super::{central_diff, rel_err};

/// Difference step for all gradient checks.
pub const H: f64 = 1e-4;
/// Gradients smaller than this are compared on absolute error.
pub const FLOOR: f64 = 1e-4;

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn geom(in_h: usize, in_w: usize, in_c: usize, out_c: usize, kh: usize, kw: usize, stride: usize, padding: Padding) -> ConvGeom {
    let (out_h, pad_top) = conv_axis(in_h, kh, stride, padding).unwrap();
    let (out_w, pad_left) = conv_axis(in_w, kw, stride, padding).unwrap();
    ConvGeom { in_h, in_w, in_c, out_h, out_w, out_c, kh, kw, stride, pad_top, pad_left }
}

pub fn conv_geoms() -> Vec<ConvGeom> {
    vec![
        geom(8, 8, 2, 3, 3, 3, 1, Padding::Valid),
        geom(8, 8, 2, 4, 3, 3, 2, Padding::Valid),
        geom(8, 8, 2, 2, 2, 3, 1, Padding::Same),
        geom(8, 7, 2, 3, 5, 5, 2, Padding::Same),
    ]
}

fn narrow<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::from(a).unwrap()).collect()
}

fn widen<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|a| a.to_f64().unwrap()).collect()
}

/// Worst relative error of one kernel over `seeds` random draws, checked
/// through `L = Σ r·y` for a random projection `r`. `backward_fn` computes
/// the analytic `(dx, dparams)`; `forward_fn` is evaluated in `f64`.
fn check_layer<F, B>(n_in: usize, n_params: usize, forward_fn: F, backward_fn: B, seeds: u64) -> f64
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
    B: Fn(&[f64], &[f64], &[f64]) -> (Vec<f64>, Vec<f64>),
{
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut x = uniform(&mut rng, n_in);
        let mut p = uniform(&mut rng, n_params);
        let r = uniform(&mut rng, forward_fn(&x, &p).len());
        let objective = |x: &[f64], p: &[f64]| forward_fn(x, p).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let (dx, dp) = backward_fn(&x, &p, &r);
        for i in 0..n_in {
            let pc = p.clone();
            let n = central_diff(&mut x, i, H, |x| objective(x, &pc));
            worst = worst.max(rel_err(dx[i], n, FLOOR));
        }
        for i in 0..n_params {
            let xc = x.clone();
            let n = central_diff(&mut p, i, H, |p| objective(&xc, p));
            worst = worst.max(rel_err(dp[i], n, FLOOR));
        }
    }
    worst
}

fn conv_bw<T: Scalar>(x: &[f64], p: &[f64], r: &[f64], g: &ConvGeom, n_w: usize) -> (Vec<f64>, Vec<f64>) {
    let (dw, db, dx) = layers::conv2d_backward(&narrow::<T>(x), &narrow::<T>(&p[..n_w]), &narrow::<T>(r), g, true);
    (widen(&dx.unwrap()), [widen(&dw), widen(&db)].concat())
}

fn dense_bw<T: Scalar>(x: &[f64], p: &[f64], r: &[f64], n_w: usize) -> (Vec<f64>, Vec<f64>) {
    let (dw, db, dx) = layers::dense_backward(&narrow::<T>(x), &narrow::<T>(&p[..n_w]), &narrow::<T>(r), true);
    (widen(&dx.unwrap()), [widen(&dw), widen(&db)].concat())
}

fn pool_bw<T: Scalar>(x: &[f64], r: &[f64], shape: [usize; 3]) -> Vec<f64> {
    let (_, arg) = layers::maxpool_forward(&narrow::<T>(x), shape, 2);
    widen(&layers::maxpool_backward(&narrow::<T>(r), &arg, x.len()))
}

fn relu_bw<T: Scalar>(x: &[f64], r: &[f64]) -> Vec<f64> {
    widen(&layers::relu_backward(&narrow::<T>(x), &narrow::<T>(r)))
}

fn softmax_bw<T: Scalar>(x: &[f64], r: &[f64]) -> Vec<f64> {
    let p = layers::softmax_forward(&narrow::<T>(x));
    widen(&layers::softmax_backward(&p, &narrow::<T>(r)))
}

fn dropout_mask<T: Scalar>(n: usize) -> Vec<T> {
    layers::dropout_forward(&vec![T::one(); n], 0.3, &mut ChaCha8Rng::seed_from_u64(5)).1
}

fn dropout_bw<T: Scalar>(r: &[f64]) -> Vec<f64> {
    widen(&layers::dropout_backward(&dropout_mask::<T>(r.len()), &narrow::<T>(r)))
}

/// Worst relative error per layer type, with analytic gradients computed in
/// `f32` when `in_f32` and in `f64` otherwise.
pub fn layer_suite(in_f32: bool, seeds: u64) -> Vec<(&'static str, f64)> {
    macro_rules! pick {
        ($f:ident ( $($a:expr),* )) => {
            if in_f32 { $f::<f32>($($a),*) } else { $f::<f64>($($a),*) }
        };
    }
    let mut out = Vec::new();

    let mut conv_worst = 0.0f64;
    for g in conv_geoms() {
        let n_w = g.out_c * g.kh * g.kw * g.in_c;
        conv_worst = conv_worst.max(check_layer(
            g.in_h * g.in_w * g.in_c,
            n_w + g.out_c,
            |x, p| layers::conv2d_forward(x, &p[..n_w], &p[n_w..], &g),
            |x, p, r| pick!(conv_bw(x, p, r, &g, n_w)),
            seeds,
        ));
    }
    out.push(("conv2d", conv_worst));

    let (n_in, units) = (7, 4);
    let n_w = n_in * units;
    out.push((
        "dense",
        check_layer(n_in, n_w + units, |x, p| layers::dense_forward(x, &p[..n_w], &p[n_w..]), |x, p, r| pick!(dense_bw(x, p, r, n_w)), seeds),
    ));

    let shape = [6, 4, 3];
    out.push((
        "maxpool",
        check_layer(72, 0, |x, _| layers::maxpool_forward(x, shape, 2).0, |x, _, r| (pick!(pool_bw(x, r, shape)), vec![]), seeds),
    ));
    out.push(("relu", check_layer(30, 0, |x, _| layers::relu_forward(x), |x, _, r| (pick!(relu_bw(x, r)), vec![]), seeds)));
    out.push(("softmax", check_layer(5, 0, |x, _| layers::softmax_forward(x), |x, _, r| (pick!(softmax_bw(x, r)), vec![]), seeds)));
    let mask = dropout_mask::<f64>(40);
    out.push((
        "dropout",
        check_layer(40, 0, |x, _| x.iter().zip(&mask).map(|(a, m)| a * m).collect(), |_, _, r| (pick!(dropout_bw(r)), vec![]), seeds),
    ));
    out
}
