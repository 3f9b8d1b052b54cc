//! AdamW with decoupled weight decay over a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates and step counter. `decay_mask[i]` selects which
/// parameters receive weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    config: AdamWConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    decay_mask: Vec<bool>,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, decay_mask: Vec<bool>) -> Self {
        let n = decay_mask.len();
        Self {
            config,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            decay_mask,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected AdamW update, in place.
///
/// `θ ← θ·(1 − η·wd)` for decayed parameters, then
/// `θ ← θ − η·m̂/(√v̂ + ε)`.
pub fn adamw_step(
    state: &mut AdamWState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != state.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            found: params.len(),
        });
    }
    if grads.len() != state.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            found: grads.len(),
        });
    }
    let AdamWConfig {
        beta1,
        beta2,
        epsilon,
    } = state.config;

    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - libm::pow(beta1, t);
    let bias2 = 1.0 - libm::pow(beta2, t);
    let decay = 1.0 - lr * weight_decay;

    for i in 0..params.len() {
        let g = grads[i];
        if state.decay_mask[i] {
            params[i] *= decay;
        }
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
    }
    Ok(())
}
