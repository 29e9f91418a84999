use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::nn::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

/// One bias-corrected Adam update of `params` in place. `step` is the
/// 1-based update count.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, step: u64, cfg: &AdamConfig) {
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let c1 = T::lit(1.0 - cfg.beta1.powi(step as i32));
    let c2 = T::lit(1.0 - cfg.beta2.powi(step as i32));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (T::one() - b1) * *g;
        *v = b2 * *v + (T::one() - b2) * *g * *g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam over an ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            states: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. The parameter list must keep the same order and
    /// shapes across calls.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>) -> Result<()> {
        if self.states.is_empty() {
            self.states = params.iter().map(|p| AdamState::new(p.len())).collect();
        }
        if self.states.len() != params.len() {
            bail!(Shape, "optimizer tracks {} tensors, got {}", self.states.len(), params.len());
        }
        self.step += 1;
        for (p, state) in params.into_iter().zip(&mut self.states) {
            if state.m.len() != p.len() {
                bail!(Shape, "parameter size changed under the optimizer");
            }
            let (values, grad) = p.data_and_grad_mut();
            let Some(grad) = grad else { continue };
            adam_step(values, grad, state, self.step, &self.config);
        }
        Ok(())
    }
}
