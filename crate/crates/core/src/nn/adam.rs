use serde::{Deserialize, Serialize};

use super::{Gradients, Model, Scalar};

/// Adam moments for every weight array, in [`Model::named_params`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T = f32> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    #[serde(skip)]
    pub m: Vec<Vec<T>>,
    #[serde(skip)]
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(model: &Model<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = model.named_params().iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }
}

/// One bias-corrected Adam update of every layer that has a gradient.
pub fn adam_step<T: Scalar>(model: &mut Model<T>, grads: &Gradients<T>, state: &mut AdamState<T>) {
    state.t += 1;
    let c = |x: f64| T::from(x).unwrap();
    let (b1, b2) = (c(state.beta1), c(state.beta2));
    let correction1 = c(1.0 - state.beta1.powi(state.t as i32));
    let correction2 = c(1.0 - state.beta2.powi(state.t as i32));
    let (lr, eps) = (c(state.lr), c(state.eps));
    let mut slot = 0;
    for (params, grad) in model.params_mut().iter_mut().zip(&grads.layers) {
        let Some(params) = params else { continue };
        if let Some(grad) = grad {
            for (w, g, k) in [(&mut params.weight, &grad.weight, slot), (&mut params.bias, &grad.bias, slot + 1)] {
                let (m, v) = (&mut state.m[k], &mut state.v[k]);
                for (((wi, &gi), mi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = b1 * *mi + (T::one() - b1) * gi;
                    *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                    let m_hat = *mi / correction1;
                    let v_hat = *vi / correction2;
                    *wi -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        slot += 2;
    }
}
