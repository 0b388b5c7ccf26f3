use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// First and second moment estimates for a list of parameter tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self::with_moments(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(params: &[&Tensor], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step: 0,
            beta1,
            beta2,
            eps,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }
}

/// One bias-corrected Adam update using the gradient buffers stored on
/// `params`. Parameters without a gradient are treated as having a zero
/// gradient. Gradient buffers are left in place; callers zero them.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, state tracks {}", params.len(), state.m.len()),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (i, p) in params.iter_mut().enumerate() {
        if state.m[i].len() != p.numel() {
            return Err(Error::shape("adam_step", format!("moment {i} length mismatch")));
        }
        let Some(grad) = p.grad().map(<[f64]>::to_vec) else {
            // zero gradient: moments decay, parameters move only through momentum
            for (m, v) in state.m[i].iter_mut().zip(state.v[i].iter_mut()) {
                *m *= b1;
                *v *= b2;
            }
            apply(p.data_mut(), &state.m[i], &state.v[i], lr, c1, c2, eps);
            continue;
        };
        for ((m, v), g) in state.m[i].iter_mut().zip(state.v[i].iter_mut()).zip(&grad) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
        }
        apply(p.data_mut(), &state.m[i], &state.v[i], lr, c1, c2, eps);
    }
    Ok(())
}

fn apply(data: &mut [f64], m: &[f64], v: &[f64], lr: f64, c1: f64, c2: f64, eps: f64) {
    for ((w, &m), &v) in data.iter_mut().zip(m).zip(v) {
        let m_hat = m / c1;
        let v_hat = v / c2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Scales every gradient buffer so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut [&mut Tensor], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let f = max_norm / norm;
        for p in params.iter_mut() {
            if let Some(g) = p.grad_mut() {
                g.iter_mut().for_each(|x| *x *= f);
            }
        }
    }
    norm
}
