//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod grad;

use std::collections::{BTreeSet, VecDeque};

use whistle_core::baseline::Connectivity;

/// Breadth-first flood fill; regions as sorted cell lists.
pub fn flood_fill(grid: &[bool], rows: usize, cols: usize, conn: Connectivity) -> BTreeSet<Vec<(usize, usize)>> {
    let mut seen = vec![false; grid.len()];
    let mut out = BTreeSet::new();
    let steps: Vec<(i64, i64)> = match conn {
        Connectivity::Four => vec![(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))).filter(|&d| d != (0, 0)).collect(),
    };
    for start in 0..grid.len() {
        if !grid[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / cols) as i64, (i % cols) as i64);
            cells.push((r as usize, c as usize));
            for (dr, dc) in &steps {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    continue;
                }
                let j = nr as usize * cols + nc as usize;
                if grid[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        cells.sort();
        out.insert(cells);
    }
    out
}

/// Quantile read off the piecewise-linear curve through `(k/(n−1), x_(k))`,
/// found by scanning segments.
pub fn scan_quantile(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    for k in 0..n - 1 {
        let (a, b) = (k as f64 / (n - 1) as f64, (k + 1) as f64 / (n - 1) as f64);
        if p >= a && p <= b {
            return x[k] + (p - a) / (b - a) * (x[k + 1] - x[k]);
        }
    }
    x[n - 1]
}

/// `P(score⁺ > score⁻) + ½·P(tie)` over all positive/negative pairs.
pub fn pair_counting_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Relative error with a floor on the denominator so that gradients near
/// zero are judged on absolute error.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference of `f` at `x[i]`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let up = f(x);
    x[i] = orig - h;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * h)
}

/// Central difference of `f(δ) = loss(w + δ)` that steps around kinks.
///
/// A ReLU or max-pool switch inside `[w − h, w + h]` biases the central
/// difference by half the gap between the forward and backward one-sided
/// slopes. When that gap exceeds 1e-3 of the slope scale the step shrinks by
/// 10× and the check repeats, down to `h·1e-4`. Smooth curvature can also
/// trip the test, which only costs a smaller step. The decision uses loss
/// values alone. Returns the estimate and whether the step had to shrink.
pub fn kink_aware_diff(mut f: impl FnMut(f64) -> f64, h: f64, floor: f64) -> (f64, bool) {
    let f0 = f(0.0);
    let mut step = h;
    let mut shrunk = false;
    loop {
        let (up, down) = (f(step), f(-step));
        let (right, left) = ((up - f0) / step, (f0 - down) / step);
        let kink = (right - left).abs() > 1e-3 * right.abs().max(left.abs()).max(floor);
        if !kink || step <= h * 1e-4 {
            return ((up - down) / (2.0 * step), shrunk);
        }
        shrunk = true;
        step /= 10.0;
    }
}

/// Outcome of a whole-model gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Weights whose difference step had to shrink around a kink.
    pub kinks: usize,
}

use whistle_core::nn::{backward, forward, loss_bce, Mode, Model, Tensor};

/// Largest relative error between the analytic gradient of the mean
/// cross-entropy (computed in `T`) and `f64` differences, over every
/// trainable weight.
/// Differences re-run only the layers downstream of the perturbed weight.
pub fn model_grad_error<T: whistle_core::nn::Scalar>(
    model: &Model<T>,
    x: &Tensor<T>,
    labels: &Tensor<T>,
    seed: u64,
    h: f64,
    floor: f64,
) -> GradCheck {
    let out = forward(model, x, Mode::Train, seed).unwrap();
    let (_, g) = loss_bce(&out.probs, labels);
    let grads = backward(model, &out.cache, &g).unwrap();

    let mut m64: Model<f64> = model.cast();
    let x64: Tensor<f64> = x.cast();
    let y64: Tensor<f64> = labels.cast();
    let batch = x.shape()[0];
    let n_layers = m64.config().layers.len();
    let mut result = GradCheck { worst: 0.0, checked: 0, kinks: 0 };
    for layer in 0..n_layers {
        let Some(grad) = &grads.layers[layer] else { continue };
        let acts: Vec<Vec<f64>> = (0..batch).map(|b| m64.run_range(x64.row(b).to_vec(), 0, layer, Mode::Train, seed, b)).collect();
        for (which, analytic) in [(0, grad.weight.data()), (1, grad.bias.data())] {
            for (i, a) in analytic.iter().enumerate() {
                let eval = |delta: f64, m: &mut Model<f64>| -> f64 {
                    let p = m.params_mut()[layer].as_mut().unwrap();
                    let arr = if which == 0 { &mut p.weight } else { &mut p.bias };
                    let orig = arr.data()[i];
                    arr.data_mut()[i] = orig + delta;
                    let mut loss = 0.0;
                    for (b, act) in acts.iter().enumerate() {
                        let z = m.run_range(act.clone(), layer, n_layers - 1, Mode::Train, seed, b);
                        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                        loss -= y64.row(b).iter().zip(&z).map(|(y, zi)| y * (zi - log_sum)).sum::<f64>();
                    }
                    let p = m.params_mut()[layer].as_mut().unwrap();
                    let arr = if which == 0 { &mut p.weight } else { &mut p.bias };
                    arr.data_mut()[i] = orig;
                    loss / batch as f64
                };
                let (numeric, shrunk) = kink_aware_diff(|d| eval(d, &mut m64), h, floor);
                result.worst = result.worst.max(rel_err(a.to_f64().unwrap(), numeric, floor));
                result.checked += 1;
                result.kinks += usize::from(shrunk);
            }
        }
    }
    result
}

/// Direct O(N²) power spectrum of one frame.
pub fn naive_dft_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            re * re + im * im
        })
        .collect()
}
