//! Elastic weight consolidation, classic and online variants.
//!
//! Parameter importance is the diagonal empirical Fisher: the mean over
//! task samples of the squared score of the log-likelihood at the
//! ground-truth label. Estimation runs evaluation-mode forwards (running
//! batch-norm statistics, no dropout) so per-sample gradients are
//! well-defined at batch size 1.

use super::{quadratic_penalty, quadratic_penalty_grad, Importance};
use crate::data::{LabelData, Sample};
use crate::error::{Error, Result};
use crate::loss::{sigmoid, softmax_rows};
use crate::model::Model;
use crate::params::ParameterSet;
use crate::tape::{GradientTape, Gradients};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// d log p(y | x, theta) / d logits for one sample.
///
/// Multiclass: one_hot(y) - softmax(z). Multilabel: y - sigmoid(z), summing
/// the per-label log-likelihoods.
pub fn loglik_logit_grad(logits: &Tensor, label: &LabelData) -> Result<Tensor> {
    match label {
        LabelData::Class(c) => {
            let width = logits.shape()[1];
            if *c >= width {
                return Err(Error::Input(format!("class {c} out of range 0..{width}")));
            }
            let probs = softmax_rows(logits);
            let mut grad = probs.data().iter().map(|p| -p).collect::<Vec<f64>>();
            grad[*c] += 1.0;
            Tensor::new(logits.shape().to_vec(), grad)
        }
        LabelData::MultiHot(bits) => {
            if bits.len() != logits.len() {
                return Err(Error::Input(format!(
                    "{} label bits for {} logits",
                    bits.len(),
                    logits.len()
                )));
            }
            let grad: Vec<f64> = logits
                .data()
                .iter()
                .zip(bits)
                .map(|(&z, &y)| f64::from(y) - sigmoid(z))
                .collect();
            Tensor::new(logits.shape().to_vec(), grad)
        }
    }
}

/// Mean over samples of the squared per-sample score, one entry per
/// parameter. `forward` must produce a fresh tape for a [1, ...] batch.
pub fn empirical_fisher(
    forward: impl Fn(&Tensor) -> Result<(Tensor, GradientTape)>,
    data: &[(Tensor, LabelData)],
) -> Result<Importance> {
    if data.is_empty() {
        return Err(Error::Input("fisher estimation needs at least one sample".into()));
    }
    let mut acc: Option<Importance> = None;
    for (input, label) in data {
        let mut batch_shape = vec![1];
        batch_shape.extend_from_slice(input.shape());
        let batch = input.reshaped(batch_shape)?;
        let (logits, tape) = forward(&batch)?;
        let seed = loglik_logit_grad(&logits, label)?;
        let grads = tape.backward(&seed)?;
        let acc = acc.get_or_insert_with(Importance::new);
        for (name, g) in grads.iter() {
            match acc.get_mut(name) {
                Some(t) => {
                    for (a, &gv) in t.data_mut().iter_mut().zip(g.data()) {
                        *a += gv * gv;
                    }
                }
                None => acc.insert(name.clone(), g.map(|v| v * v)),
            }
        }
    }
    let mut fisher = acc.expect("nonempty data");
    fisher.scale(1.0 / data.len() as f64);
    Ok(fisher)
}

fn fisher_of_model(model: &Model, task_data: &[Sample]) -> Result<Importance> {
    if task_data.is_empty() {
        return Err(Error::Input("consolidation needs a nonempty task dataset".into()));
    }
    let pairs: Vec<(Tensor, LabelData)> =
        task_data.iter().map(|s| (s.input.clone(), s.label.clone())).collect();
    empirical_fisher(|batch| model.forward_traced(batch), &pairs)
}

/// One consolidated task: anchor parameters and their Fisher diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EwcTask {
    pub anchor: ParameterSet,
    pub fisher: Importance,
}

/// Classic EWC: one (anchor, Fisher) entry per completed task; the penalty
/// sums the per-task quadratic terms with weight lambda/2 each.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EwcConsolidation {
    tasks: Vec<EwcTask>,
}

impl EwcConsolidation {
    pub fn new() -> Self {
        EwcConsolidation { tasks: Vec::new() }
    }

    pub fn tasks(&self) -> &[EwcTask] {
        &self.tasks
    }

    /// Append (theta*, F) for the just-finished task.
    pub fn consolidate(&mut self, model: &Model, task_data: &[Sample]) -> Result<()> {
        let fisher = fisher_of_model(model, task_data)?;
        self.tasks.push(EwcTask { anchor: model.params().snapshot(), fisher });
        Ok(())
    }

    /// Append a precomputed (anchor, Fisher) entry.
    pub fn push_task(&mut self, anchor: ParameterSet, fisher: Importance) {
        self.tasks.push(EwcTask { anchor, fisher });
    }

    /// (lambda/2) * sum_tasks sum_i F_i (theta_i - theta*_i)^2
    pub fn penalty(&self, params: &ParameterSet, lambda: f64) -> f64 {
        self.tasks
            .iter()
            .map(|t| quadratic_penalty(&t.fisher, &t.anchor, params, lambda / 2.0))
            .sum()
    }

    /// d/dtheta_i = lambda * sum_tasks F_i (theta_i - theta*_i)
    pub fn penalty_grad(&self, params: &ParameterSet, lambda: f64, grads: &mut Gradients) {
        for t in &self.tasks {
            quadratic_penalty_grad(&t.fisher, &t.anchor, params, lambda, grads);
        }
    }
}

/// Online EWC: a single running Fisher sum with decay gamma and the
/// previous-task parameters as the only anchor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EwcOnlineState {
    fisher: Importance,
    anchor: Option<ParameterSet>,
    gamma: f64,
}

impl EwcOnlineState {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {gamma}")));
        }
        Ok(EwcOnlineState { fisher: Importance::new(), anchor: None, gamma })
    }

    pub fn fisher(&self) -> &Importance {
        &self.fisher
    }

    pub fn anchor(&self) -> Option<&ParameterSet> {
        self.anchor.as_ref()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Running update: F~ <- gamma * F~ + F_T; anchor <- current params.
    pub fn update(&mut self, new_fisher: &Importance, current: &ParameterSet) {
        self.fisher.scale(self.gamma);
        self.fisher.add_assign(new_fisher);
        self.anchor = Some(current.snapshot());
    }

    pub fn consolidate(&mut self, model: &Model, task_data: &[Sample]) -> Result<()> {
        let fisher = fisher_of_model(model, task_data)?;
        self.update(&fisher, model.params());
        Ok(())
    }

    /// lambda * sum_i F~_i (theta_i - theta_prev_i)^2; zero before the
    /// first consolidation.
    pub fn penalty(&self, params: &ParameterSet, lambda: f64) -> f64 {
        match &self.anchor {
            Some(anchor) => quadratic_penalty(&self.fisher, anchor, params, lambda),
            None => 0.0,
        }
    }

    pub fn penalty_grad(&self, params: &ParameterSet, lambda: f64, grads: &mut Gradients) {
        if let Some(anchor) = &self.anchor {
            quadratic_penalty_grad(&self.fisher, anchor, params, 2.0 * lambda, grads);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::GradientTape;

    fn params_1d(name: &str, values: &[f64]) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert(name, Tensor::vector(values)).unwrap();
        p
    }

    fn importance_1d(name: &str, values: &[f64]) -> Importance {
        let mut imp = Importance::new();
        imp.insert(name, Tensor::vector(values));
        imp
    }

    /// Single-parameter logistic model p(y=1) = sigmoid(w * x) traced by
    /// hand: logits = x * w.
    fn logistic_forward(w: f64) -> impl Fn(&Tensor) -> Result<(Tensor, GradientTape)> {
        move |batch: &Tensor| {
            let mut tape = GradientTape::new();
            let x = tape.register_input(&batch.reshaped(vec![1, 1])?);
            let wid = tape.register_param("w", &Tensor::matrix(1, 1, vec![w])?);
            let y = tape.matmul(x, wid);
            tape.set_output(y);
            Ok((tape.tensor(y), tape))
        }
    }

    #[test]
    fn zero_score_gives_zero_fisher() {
        // x = 0 makes d logit / dw = 0 for every sample.
        let data = vec![
            (Tensor::vector(&[0.0]), LabelData::MultiHot(vec![1])),
            (Tensor::vector(&[0.0]), LabelData::MultiHot(vec![0])),
        ];
        let fisher = empirical_fisher(logistic_forward(0.7), &data).unwrap();
        assert_eq!(fisher.get("w").unwrap().data(), &[0.0]);
    }

    // Closed-form score oracle: d log p / dw = (y - sigmoid(wx)) * x.
    #[test]
    fn logistic_fisher_matches_mean_squared_score() {
        let w = 0.8;
        let data = vec![
            (Tensor::vector(&[2.0]), LabelData::MultiHot(vec![1])),
            (Tensor::vector(&[-1.5]), LabelData::MultiHot(vec![0])),
        ];
        let fisher = empirical_fisher(logistic_forward(w), &data).unwrap();
        let score = |x: f64, y: f64| (y - sigmoid(w * x)) * x;
        let expected = (score(2.0, 1.0).powi(2) + score(-1.5, 0.0).powi(2)) / 2.0;
        let got = fisher.get("w").unwrap().data()[0];
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn multiclass_score_is_onehot_minus_softmax() {
        let logits = Tensor::matrix(1, 3, vec![0.2, -0.4, 1.1]).unwrap();
        let g = loglik_logit_grad(&logits, &LabelData::Class(2)).unwrap();
        let p = softmax_rows(&logits);
        for j in 0..3 {
            let expected = if j == 2 { 1.0 - p.data()[j] } else { -p.data()[j] };
            assert!((g.data()[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn consolidations_append_and_do_not_mutate_earlier_entries() {
        let mut cons = EwcConsolidation::new();
        // Hand-rolled: push two entries through the public type directly.
        let data = vec![(Tensor::vector(&[1.0]), LabelData::MultiHot(vec![1]))];
        let fisher1 = empirical_fisher(logistic_forward(0.3), &data).unwrap();
        cons.tasks.push(EwcTask { anchor: params_1d("w", &[0.3]), fisher: fisher1.clone() });
        let first_snapshot = cons.tasks()[0].clone();
        let fisher2 = empirical_fisher(logistic_forward(-0.9), &data).unwrap();
        cons.tasks.push(EwcTask { anchor: params_1d("w", &[-0.9]), fisher: fisher2 });
        assert_eq!(cons.tasks().len(), 2);
        assert_eq!(cons.tasks()[0].anchor, first_snapshot.anchor);
        assert_eq!(cons.tasks()[0].fisher, first_snapshot.fisher);
    }

    #[test]
    fn penalty_zero_at_anchor() {
        let mut cons = EwcConsolidation::new();
        cons.tasks.push(EwcTask {
            anchor: params_1d("w", &[0.5, -1.0]),
            fisher: importance_1d("w", &[3.0, 4.0]),
        });
        assert_eq!(cons.penalty(&params_1d("w", &[0.5, -1.0]), 10.0), 0.0);
    }

    // F=[1,2], dtheta=[0.1,0.2], lambda=2 -> (2/2)(1*0.01 + 2*0.04) = 0.09
    #[test]
    fn penalty_direct_evaluation() {
        let mut cons = EwcConsolidation::new();
        cons.tasks.push(EwcTask {
            anchor: params_1d("w", &[0.0, 0.0]),
            fisher: importance_1d("w", &[1.0, 2.0]),
        });
        let p = cons.penalty(&params_1d("w", &[0.1, 0.2]), 2.0);
        assert!((p - 0.09).abs() < 1e-12, "{p}");
    }

    // Per-task oracle: the three-task penalty is the sum of three
    // independently computed single-task penalties.
    #[test]
    fn multi_task_penalty_sums_per_task_terms() {
        let anchors = [[0.1, 0.4], [-0.2, 0.9], [1.5, -0.3]];
        let fishers = [[1.0, 0.5], [2.0, 0.0], [0.25, 3.0]];
        let theta = params_1d("w", &[0.6, -0.1]);
        let lambda = 4.0;

        let mut cons = EwcConsolidation::new();
        let mut expected = 0.0;
        for (a, f) in anchors.iter().zip(&fishers) {
            cons.tasks.push(EwcTask {
                anchor: params_1d("w", a),
                fisher: importance_1d("w", f),
            });
            let mut single = EwcConsolidation::new();
            single.tasks.push(EwcTask {
                anchor: params_1d("w", a),
                fisher: importance_1d("w", f),
            });
            expected += single.penalty(&theta, lambda);
        }
        assert!((cons.penalty(&theta, lambda) - expected).abs() < 1e-12);
    }

    #[test]
    fn online_gamma_one_with_zero_history_is_identity() {
        let mut state = EwcOnlineState::new(1.0).unwrap();
        let fisher = importance_1d("w", &[2.0, 5.0]);
        state.update(&fisher, &params_1d("w", &[0.0, 0.0]));
        assert_eq!(state.fisher(), &fisher);
    }

    // gamma=0.5 twice with F_T = 1: 0.5*(0.5*0 + 1) + 1 = 1.5
    #[test]
    fn online_recurrence_unrolls() {
        let mut state = EwcOnlineState::new(0.5).unwrap();
        let one = importance_1d("w", &[1.0]);
        let p = params_1d("w", &[0.0]);
        state.update(&one, &p);
        state.update(&one, &p);
        assert!((state.fisher().get("w").unwrap().data()[0] - 1.5).abs() < 1e-12);
    }

    // Scalar recurrence oracle over k updates.
    #[test]
    fn online_updates_match_geometric_accumulation() {
        let gamma = 0.7;
        let mut state = EwcOnlineState::new(gamma).unwrap();
        let p = params_1d("w", &[0.0]);
        let inputs = [0.3, 1.2, 0.05, 2.0, 0.9];
        let mut expected = 0.0;
        for &f in &inputs {
            state.update(&importance_1d("w", &[f]), &p);
            expected = gamma * expected + f;
        }
        let got = state.fisher().get("w").unwrap().data()[0];
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn online_penalty_values() {
        let mut state = EwcOnlineState::new(1.0).unwrap();
        // theta = anchor -> 0
        state.update(&importance_1d("w", &[2.0]), &params_1d("w", &[1.0]));
        assert_eq!(state.penalty(&params_1d("w", &[1.0]), 3.0), 0.0);
        // F~ = [2], dtheta = [0.5], lambda = 1 -> 2 * 0.25 = 0.5
        let p = state.penalty(&params_1d("w", &[1.5]), 1.0);
        assert!((p - 0.5).abs() < 1e-12, "{p}");
    }

    // Cross-strategy equivalence: with gamma = 1 and one task seen, the
    // online penalty equals the classic one up to the lambda/2-vs-lambda
    // convention (factor 2).
    #[test]
    fn online_equals_classic_up_to_half_factor() {
        let anchor = [0.25, -0.6];
        let fisher_vals = [1.5, 0.75];
        let theta = params_1d("w", &[0.5, 0.1]);
        let lambda = 2.5;

        let mut classic = EwcConsolidation::new();
        classic.tasks.push(EwcTask {
            anchor: params_1d("w", &anchor),
            fisher: importance_1d("w", &fisher_vals),
        });
        let mut online = EwcOnlineState::new(1.0).unwrap();
        online.update(&importance_1d("w", &fisher_vals), &params_1d("w", &anchor));

        let c = classic.penalty(&theta, lambda);
        let o = online.penalty(&theta, lambda);
        assert!((o - 2.0 * c).abs() < 1e-12, "online {o} vs classic {c}");
    }

    #[test]
    fn empty_task_data_is_input_error() {
        let err = empirical_fisher(logistic_forward(0.1), &[]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn gamma_outside_unit_interval_rejected() {
        assert!(EwcOnlineState::new(0.0).is_err());
        assert!(EwcOnlineState::new(1.5).is_err());
        assert!(EwcOnlineState::new(1.0).is_ok());
    }
}
