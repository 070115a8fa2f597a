//! Synaptic intelligence: per-parameter path-integral importance.
//!
//! During a task, each optimizer step accrues omega_k += -g_k * dtheta_k
//! (the task-loss gradient times the realized parameter change, so loss
//! descent accrues positive omega). At a task boundary the accrued path
//! integral is normalized by the squared task-level parameter displacement
//! plus a damping term and added to the importance Omega; negative omega is
//! clamped to zero first so Omega stays nonnegative.

use super::{quadratic_penalty, quadratic_penalty_grad, Importance};
use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::tape::Gradients;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiState {
    /// Path accumulator omega, reset at every task boundary.
    omega: Importance,
    /// Consolidated importance Omega (nonnegative).
    importance: Importance,
    /// Parameters at the end of the previous task; the penalty anchor and
    /// the reference point for the task displacement.
    anchor: Option<ParameterSet>,
    /// Damping xi > 0 in the Omega denominator.
    xi: f64,
}

impl SiState {
    pub fn new(xi: f64) -> Result<Self> {
        if xi <= 0.0 {
            return Err(Error::Config(format!("xi must be > 0, got {xi}")));
        }
        Ok(SiState { omega: Importance::new(), importance: Importance::new(), anchor: None, xi })
    }

    /// Rebuild a state from consolidated parts (resume, analysis).
    pub fn from_parts(xi: f64, anchor: ParameterSet, importance: Importance) -> Result<Self> {
        let mut state = Self::new(xi)?;
        state.anchor = Some(anchor);
        state.importance = importance;
        Ok(state)
    }

    pub fn importance(&self) -> &Importance {
        &self.importance
    }

    pub fn omega(&self) -> &Importance {
        &self.omega
    }

    pub fn anchor(&self) -> Option<&ParameterSet> {
        self.anchor.as_ref()
    }

    /// Record the task-start parameters; called once before the first step
    /// of every task (a no-op when resuming mid-task).
    pub fn begin_task(&mut self, params: &ParameterSet) {
        if self.anchor.is_none() {
            self.anchor = Some(params.snapshot());
        }
    }

    /// omega_k += -g_k * (after_k - before_k), called once per optimizer
    /// step with the step's task-loss gradient.
    pub fn accumulate_step(
        &mut self,
        task_grads: &Gradients,
        before: &ParameterSet,
        after: &ParameterSet,
    ) {
        for (name, g) in task_grads.iter() {
            let (Some(b), Some(a)) = (before.get(name), after.get(name)) else { continue };
            if self.omega.get(name).is_none() {
                self.omega.insert(name.clone(), Tensor::zeros(g.shape().to_vec()));
            }
            let acc = self.omega.get_mut(name).expect("inserted above");
            for ((o, &gv), (&bv, &av)) in
                acc.data_mut().iter_mut().zip(g.data()).zip(b.data().iter().zip(a.data()))
            {
                *o += -gv * (av - bv);
            }
        }
    }

    /// Task-boundary consolidation:
    /// Omega_k += max(omega_k, 0) / ((theta_end_k - theta_prev_k)^2 + xi);
    /// then omega resets and the anchor moves to theta_end.
    pub fn consolidate(&mut self, params_end: &ParameterSet) {
        let anchor = self.anchor.clone().unwrap_or_else(|| params_end.snapshot());
        for (name, omega) in self.omega.iter() {
            let (Some(prev), Some(end)) = (anchor.get(name), params_end.get(name)) else {
                continue;
            };
            let increments: Vec<f64> = omega
                .data()
                .iter()
                .zip(prev.data().iter().zip(end.data()))
                .map(|(&o, (&p, &e))| o.max(0.0) / ((e - p) * (e - p) + self.xi))
                .collect();
            if let Some(t) = self.importance.get_mut(name) {
                for (dst, inc) in t.data_mut().iter_mut().zip(increments) {
                    *dst += inc;
                }
            } else {
                self.importance.insert(
                    name.clone(),
                    Tensor::new(omega.shape().to_vec(), increments).expect("shape"),
                );
            }
        }
        self.omega = Importance::new();
        self.anchor = Some(params_end.snapshot());
    }

    /// c * sum_k Omega_k (theta*_k - theta_k)^2
    pub fn penalty(&self, params: &ParameterSet, c: f64) -> f64 {
        match &self.anchor {
            Some(anchor) => quadratic_penalty(&self.importance, anchor, params, c),
            None => 0.0,
        }
    }

    pub fn penalty_grad(&self, params: &ParameterSet, c: f64, grads: &mut Gradients) {
        if let Some(anchor) = &self.anchor {
            quadratic_penalty_grad(&self.importance, anchor, params, 2.0 * c, grads);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_1d(values: &[f64]) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::vector(values)).unwrap();
        p
    }

    fn grads_1d(values: &[f64]) -> Gradients {
        let mut g = Gradients::new();
        g.insert("w", Tensor::vector(values));
        g
    }

    #[test]
    fn zero_gradient_leaves_omega_unchanged() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        si.accumulate_step(&grads_1d(&[0.0]), &params_1d(&[0.0]), &params_1d(&[0.5]));
        assert_eq!(si.omega().get("w").unwrap().data(), &[0.0]);
    }

    // Descent accrues positive omega: g=1, dtheta=-0.1 -> omega += 0.1.
    #[test]
    fn descent_sign_convention() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        si.accumulate_step(&grads_1d(&[1.0]), &params_1d(&[0.0]), &params_1d(&[-0.1]));
        let omega = si.omega().get("w").unwrap().data()[0];
        assert!((omega - 0.1).abs() < 1e-12, "{omega}");
    }

    // Analytic path-integral oracle: on L = 0.5*a*(w - t)^2 descended with
    // small steps, sum omega approximates the total loss drop (exact in the
    // continuous limit).
    #[test]
    fn path_integral_approximates_loss_drop() {
        let (a, target) = (2.0, 1.5);
        let loss = |w: f64| 0.5 * a * (w - target) * (w - target);
        let grad = |w: f64| a * (w - target);
        let mut si = SiState::new(0.1).unwrap();
        let mut w = -1.0;
        si.begin_task(&params_1d(&[w]));
        let eta = 1e-3;
        for _ in 0..4000 {
            let g = grad(w);
            let w_next = w - eta * g;
            si.accumulate_step(&grads_1d(&[g]), &params_1d(&[w]), &params_1d(&[w_next]));
            w = w_next;
        }
        let omega = si.omega().get("w").unwrap().data()[0];
        let drop = loss(-1.0) - loss(w);
        let rel = (omega - drop).abs() / drop;
        assert!(rel < 0.01, "omega {omega} vs loss drop {drop} (rel {rel})");
    }

    #[test]
    fn consolidate_with_zero_omega_keeps_importance() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        si.consolidate(&params_1d(&[1.0]));
        assert!(si.importance().is_empty() || si.importance().all_nonnegative());
        assert!(si
            .importance()
            .get("w")
            .map(|t| t.data().iter().all(|&v| v == 0.0))
            .unwrap_or(true));
    }

    // omega=1, task displacement 1, xi=0.1 -> Omega += 1/1.1.
    #[test]
    fn consolidate_direct_evaluation() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        si.accumulate_step(&grads_1d(&[-1.0]), &params_1d(&[0.0]), &params_1d(&[1.0]));
        si.consolidate(&params_1d(&[1.0]));
        let omega_cap = si.importance().get("w").unwrap().data()[0];
        assert!((omega_cap - 1.0 / 1.1).abs() < 1e-12, "{omega_cap}");
        // omega reset, anchor moved
        assert!(si.omega().is_empty());
        assert_eq!(si.anchor().unwrap().get("w").unwrap().data(), &[1.0]);
    }

    #[test]
    fn negative_omega_clamps_to_zero() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        // ascent: g = 1, dtheta = +1 -> omega = -1
        si.accumulate_step(&grads_1d(&[1.0]), &params_1d(&[0.0]), &params_1d(&[1.0]));
        si.consolidate(&params_1d(&[1.0]));
        assert_eq!(si.importance().get("w").unwrap().data(), &[0.0]);
    }

    #[test]
    fn penalty_values() {
        let mut si = SiState::new(0.1).unwrap();
        si.begin_task(&params_1d(&[1.0, 2.0]));
        si.consolidate(&params_1d(&[1.0, 2.0]));
        // Manually install Omega = [2, 0] to pin the arithmetic.
        si.importance.insert("w", Tensor::vector(&[2.0, 0.0]));
        assert_eq!(si.penalty(&params_1d(&[1.0, 2.0]), 1.0), 0.0);
        // Omega=[2], dtheta=0.3 on first coord, c=1 -> 0.18
        let p = si.penalty(&params_1d(&[1.3, 2.0]), 1.0);
        assert!((p - 0.18).abs() < 1e-12, "{p}");
    }

    // Elementwise scalar oracle on random state.
    #[test]
    fn penalty_matches_elementwise_oracle() {
        let mut rng = crate::rng::rng_from_seed(21);
        let n = 17;
        let anchor: Vec<f64> = (0..n).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let theta: Vec<f64> = (0..n).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let omega: Vec<f64> = (0..n).map(|_| crate::rng::uniform(&mut rng, 0.0, 3.0)).collect();
        let c = 1.7;
        let mut si = SiState::new(0.5).unwrap();
        si.begin_task(&params_1d(&anchor));
        si.consolidate(&params_1d(&anchor));
        si.importance.insert("w", Tensor::vector(&omega));
        let expected: f64 = omega
            .iter()
            .zip(anchor.iter().zip(&theta))
            .map(|(&o, (&a, &t))| c * o * (a - t) * (a - t))
            .sum();
        let got = si.penalty(&params_1d(&theta), c);
        assert!((got - expected).abs() < 1e-12);
    }

    // Large xi drives Omega increments toward zero.
    #[test]
    fn huge_damping_degenerates_to_zero_penalty() {
        let mut si = SiState::new(1e12).unwrap();
        si.begin_task(&params_1d(&[0.0]));
        si.accumulate_step(&grads_1d(&[-1.0]), &params_1d(&[0.0]), &params_1d(&[1.0]));
        si.consolidate(&params_1d(&[1.0]));
        let p = si.penalty(&params_1d(&[5.0]), 10.0);
        assert!(p < 1e-9, "{p}");
    }

    #[test]
    fn invalid_xi_rejected() {
        assert!(SiState::new(0.0).is_err());
        assert!(SiState::new(-1.0).is_err());
    }
}
