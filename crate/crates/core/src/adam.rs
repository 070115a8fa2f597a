//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::tape::Gradients;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Per-parameter first/second moment state plus the step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: ParameterSet,
    v: ParameterSet,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with moments shaped like `params`.
    pub fn new(params: &ParameterSet) -> Self {
        Self::with_hyperparams(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(params: &ParameterSet, beta1: f64, beta2: f64, eps: f64) -> Self {
        let mut m = ParameterSet::new();
        let mut v = ParameterSet::new();
        for (name, tensor) in params.iter() {
            m.insert(name, Tensor::zeros(tensor.shape().to_vec())).expect("unique names");
            v.insert(name, Tensor::zeros(tensor.shape().to_vec())).expect("unique names");
        }
        AdamState { m, v, t: 0, beta1, beta2, eps }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place. Deterministic in (params, grads, state, lr).
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    for (name, g) in grads.iter() {
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient for parameter '{name}' at flat index {pos}"
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let Some(g) = grads.get(name) else { continue };
        let m = state.m.get_mut(name).expect("moment tracked");
        let v = state.v.get_mut(name).expect("moment tracked");
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mv = state.beta1 * *mv + (1.0 - state.beta1) * gv;
            *vv = state.beta2 * *vv + (1.0 - state.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
