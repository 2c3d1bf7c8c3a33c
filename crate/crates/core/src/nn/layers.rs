//! Per-example forward and backward kernels. Image tensors are `[h, w, c]`
//! row-major; convolution weights are `[out, kh, kw, in]`; dense weights are
//! `[in, out]`.

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    /// Range of kernel offsets that land inside the input for one output
    /// coordinate, and the input index of the first such offset.
    fn span(out: usize, stride: usize, pad: usize, k: usize, n: usize) -> (usize, usize, usize) {
        let origin = (out * stride) as isize - pad as isize;
        let lo = (-origin).max(0) as usize;
        let hi = ((n as isize - origin).min(k as isize)).max(0) as usize;
        (lo, hi.max(lo), (origin + lo as isize).max(0) as usize)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn conv2d_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], g: &ConvGeom) -> Vec<T> {
    let mut out = vec![T::zero(); g.out_h * g.out_w * g.out_c];
    let row = g.in_w * g.in_c;
    let kstride = g.kh * g.kw * g.in_c;
    for oy in 0..g.out_h {
        let (ky_lo, ky_hi, iy0) = ConvGeom::span(oy, g.stride, g.pad_top, g.kh, g.in_h);
        for ox in 0..g.out_w {
            let (kx_lo, kx_hi, ix0) = ConvGeom::span(ox, g.stride, g.pad_left, g.kw, g.in_w);
            let len = (kx_hi - kx_lo) * g.in_c;
            let o = &mut out[(oy * g.out_w + ox) * g.out_c..][..g.out_c];
            o.copy_from_slice(bias);
            for (dy, ky) in (ky_lo..ky_hi).enumerate() {
                let patch = &input[(iy0 + dy) * row + ix0 * g.in_c..][..len];
                for (oc, acc) in o.iter_mut().enumerate() {
                    let w = &weight[oc * kstride + (ky * g.kw + kx_lo) * g.in_c..][..len];
                    *acc += dot(patch, w);
                }
            }
        }
    }
    out
}

/// Returns weight and bias gradients, plus the input gradient when asked.
pub fn conv2d_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    g: &ConvGeom,
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Option<Vec<T>>) {
    let mut dw = vec![T::zero(); weight.len()];
    let mut db = vec![T::zero(); g.out_c];
    let mut dx = want_input_grad.then(|| vec![T::zero(); input.len()]);
    let row = g.in_w * g.in_c;
    let kstride = g.kh * g.kw * g.in_c;
    for oy in 0..g.out_h {
        let (ky_lo, ky_hi, iy0) = ConvGeom::span(oy, g.stride, g.pad_top, g.kh, g.in_h);
        for ox in 0..g.out_w {
            let (kx_lo, kx_hi, ix0) = ConvGeom::span(ox, g.stride, g.pad_left, g.kw, g.in_w);
            let len = (kx_hi - kx_lo) * g.in_c;
            let go = &grad_out[(oy * g.out_w + ox) * g.out_c..][..g.out_c];
            for (b, &v) in db.iter_mut().zip(go) {
                *b += v;
            }
            for (dy, ky) in (ky_lo..ky_hi).enumerate() {
                let start = (iy0 + dy) * row + ix0 * g.in_c;
                let patch = &input[start..start + len];
                for (oc, &v) in go.iter().enumerate() {
                    if v == T::zero() {
                        continue;
                    }
                    let woff = oc * kstride + (ky * g.kw + kx_lo) * g.in_c;
                    axpy(v, patch, &mut dw[woff..woff + len]);
                    if let Some(dx) = dx.as_mut() {
                        axpy(v, &weight[woff..woff + len], &mut dx[start..start + len]);
                    }
                }
            }
        }
    }
    (dw, db, dx)
}

/// Non-overlapping `size × size` max pooling; also returns the input index
/// of each maximum (first one on ties).
pub fn maxpool_forward<T: Scalar>(input: &[T], shape: [usize; 3], size: usize) -> (Vec<T>, Vec<usize>) {
    let [h, w, c] = shape;
    let (oh, ow) = (h / size, w / size);
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut arg = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = (oy * size * w + ox * size) * c + ch;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = ((oy * size + dy) * w + ox * size + dx) * c + ch;
                        if input[i] > input[best] {
                            best = i;
                        }
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(grad_out: &[T], argmax: &[usize], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        dx[i] += g;
    }
    dx
}

pub fn dense_forward<T: Scalar>(x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let units = bias.len();
    let mut y = bias.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi != T::zero() {
            axpy(xi, &weight[i * units..(i + 1) * units], &mut y);
        }
    }
    y
}

pub fn dense_backward<T: Scalar>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Option<Vec<T>>) {
    let units = grad_out.len();
    let mut dw = vec![T::zero(); weight.len()];
    for (i, &xi) in x.iter().enumerate() {
        if xi != T::zero() {
            axpy(xi, grad_out, &mut dw[i * units..(i + 1) * units]);
        }
    }
    let dx = want_input_grad.then(|| (0..x.len()).map(|i| dot(&weight[i * units..(i + 1) * units], grad_out)).collect());
    (dw, grad_out.to_vec(), dx)
}

pub fn relu_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.max(T::zero())).collect()
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(x: &[T], grad_out: &[T]) -> Vec<T> {
    x.iter().zip(grad_out).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect()
}

pub fn softmax_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax: `p ⊙ (g − ⟨g, p⟩)`.
pub fn softmax_backward<T: Scalar>(probs: &[T], grad_out: &[T]) -> Vec<T> {
    let inner = dot(probs, grad_out);
    probs.iter().zip(grad_out).map(|(&p, &g)| p * (g - inner)).collect()
}

/// Inverted dropout: kept activations are scaled by `1/(1 − rate)`. The mask
/// holds the per-element multiplier (0 or the scale).
pub fn dropout_forward<T: Scalar>(x: &[T], rate: f64, rng: &mut impl rand::Rng) -> (Vec<T>, Vec<T>) {
    let scale = T::from(1.0 / (1.0 - rate)).unwrap();
    let mask: Vec<T> = x.iter().map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale }).collect();
    (x.iter().zip(&mask).map(|(&v, &m)| v * m).collect(), mask)
}

pub fn dropout_backward<T: Scalar>(mask: &[T], grad_out: &[T]) -> Vec<T> {
    mask.iter().zip(grad_out).map(|(&m, &g)| m * g).collect()
}
