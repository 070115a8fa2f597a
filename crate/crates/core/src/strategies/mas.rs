//! Memory-aware synapses: importance from output sensitivity.
//!
//! Omega is the mean over (unlabelled) samples of the absolute gradient of
//! the squared L2 norm of the model output with respect to each parameter.
//! The output is squashed first: softmax probabilities in multiclass mode,
//! sigmoid probabilities in multilabel mode. Labels are never used.

use super::{quadratic_penalty, quadratic_penalty_grad, Importance};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::loss::{sigmoid, softmax_rows};
use crate::model::{Model, TaskMode};
use crate::params::ParameterSet;
use crate::tape::{GradientTape, Gradients};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// How the raw logits are squashed before taking ||f(x)||^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSquash {
    Softmax,
    Sigmoid,
    /// Raw logits; the norm is taken on the output directly.
    Identity,
}

impl OutputSquash {
    pub fn for_mode(mode: TaskMode) -> Self {
        match mode {
            TaskMode::Multiclass => OutputSquash::Softmax,
            TaskMode::Multilabel => OutputSquash::Sigmoid,
        }
    }
}

/// d ||f(z)||^2 / dz for one sample's logits row.
fn norm_sq_logit_grad(logits: &Tensor, squash: OutputSquash) -> Tensor {
    match squash {
        OutputSquash::Identity => logits.map(|z| 2.0 * z),
        OutputSquash::Sigmoid => logits.map(|z| {
            let s = sigmoid(z);
            2.0 * s * s * (1.0 - s)
        }),
        OutputSquash::Softmax => {
            let p = softmax_rows(logits);
            let norm_sq: f64 = p.data().iter().map(|v| v * v).sum();
            let data: Vec<f64> =
                p.data().iter().map(|&pj| 2.0 * pj * (pj - norm_sq)).collect();
            Tensor::new(logits.shape().to_vec(), data).expect("shape")
        }
    }
}

/// Omega = mean over samples of |d ||f(x)||^2 / dtheta|; labels ignored.
pub fn mas_estimate_importance(
    forward: impl Fn(&Tensor) -> Result<(Tensor, GradientTape)>,
    inputs: &[Tensor],
    squash: OutputSquash,
) -> Result<Importance> {
    if inputs.is_empty() {
        return Err(Error::Input("importance estimation needs at least one sample".into()));
    }
    let mut acc: Option<Importance> = None;
    for input in inputs {
        let mut batch_shape = vec![1];
        batch_shape.extend_from_slice(input.shape());
        let batch = input.reshaped(batch_shape)?;
        let (logits, tape) = forward(&batch)?;
        let seed = norm_sq_logit_grad(&logits, squash);
        let grads = tape.backward(&seed)?;
        let acc = acc.get_or_insert_with(Importance::new);
        for (name, g) in grads.iter() {
            match acc.get_mut(name) {
                Some(t) => {
                    for (a, &gv) in t.data_mut().iter_mut().zip(g.data()) {
                        *a += gv.abs();
                    }
                }
                None => acc.insert(name.clone(), g.map(f64::abs)),
            }
        }
    }
    let mut omega = acc.expect("nonempty inputs");
    omega.scale(1.0 / inputs.len() as f64);
    Ok(omega)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MasState {
    /// Accumulated importance across consolidated tasks.
    importance: Importance,
    anchor: Option<ParameterSet>,
}

impl MasState {
    pub fn new() -> Self {
        MasState { importance: Importance::new(), anchor: None }
    }

    /// Rebuild a state from consolidated parts (resume, analysis).
    pub fn from_parts(anchor: ParameterSet, importance: Importance) -> Self {
        MasState { importance, anchor: Some(anchor) }
    }

    pub fn importance(&self) -> &Importance {
        &self.importance
    }

    pub fn anchor(&self) -> Option<&ParameterSet> {
        self.anchor.as_ref()
    }

    /// Estimate importance on the task's inputs (labels unused), add it to
    /// the running Omega and move the anchor to the current parameters.
    pub fn consolidate(&mut self, model: &Model, task_data: &[Sample]) -> Result<()> {
        if task_data.is_empty() {
            return Err(Error::Input("consolidation needs a nonempty task dataset".into()));
        }
        let inputs: Vec<Tensor> = task_data.iter().map(|s| s.input.clone()).collect();
        let squash = OutputSquash::for_mode(model.config().task_mode);
        let omega =
            mas_estimate_importance(|batch| model.forward_traced(batch), &inputs, squash)?;
        self.importance.add_assign(&omega);
        self.anchor = Some(model.params().snapshot());
        Ok(())
    }

    /// lambda * sum Omega (theta - theta*)^2
    pub fn penalty(&self, params: &ParameterSet, lambda: f64) -> f64 {
        match &self.anchor {
            Some(anchor) => quadratic_penalty(&self.importance, anchor, params, lambda),
            None => 0.0,
        }
    }

    pub fn penalty_grad(&self, params: &ParameterSet, lambda: f64, grads: &mut Gradients) {
        if let Some(anchor) = &self.anchor {
            quadratic_penalty_grad(&self.importance, anchor, params, 2.0 * lambda, grads);
        }
    }
}
