//! Finite-difference verification of the autodiff stack and the penalty
//! gradients.
//!
//! A probe draws a random model configuration (head kind, batch-norm,
//! dropout, residual skips, task mode), a random batch and labels, and
//! compares the taped backward pass against central differences with step
//! 1e-5 on a sample of coordinates. Biases are nudged positive after
//! initialization so tiny ReLU stacks are not born dead with every
//! pre-activation sitting on the kink, where one-sided derivatives make
//! finite differences meaningless.

use crate::loss::{loss_sigmoid_bce, loss_softmax_ce};
use crate::model::{build_model, ForwardOpts, HeadKind, Model, ModelConfig, TaskMode};
use crate::params::ParameterSet;
use crate::rng::{rng_from_seed, subseed, uniform};
use crate::strategies::{EwcConsolidation, EwcOnlineState, Importance, MasState, SiState};
use crate::tape::Gradients;
use crate::tensor::Tensor;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
/// Near-zero analytic/numeric pairs are compared absolutely below this.
pub const ABS_FLOOR: f64 = 1e-7;

pub fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < ABS_FLOOR {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

struct Probe {
    cfg: ModelConfig,
    batch: Tensor,
    labels: Tensor,
    weights: Vec<f64>,
    domain_ids: Option<Vec<usize>>,
    dropout_seed: u64,
}

fn make_probe(seed: u64) -> (Probe, Model) {
    let mut rng = rng_from_seed(seed);
    let head = match seed % 3 {
        0 => HeadKind::Single,
        1 => HeadKind::Ddc,
        _ => HeadKind::Dic,
    };
    let task_mode = if seed % 5 == 0 && head != HeadKind::Ddc {
        TaskMode::Multilabel
    } else {
        TaskMode::Multiclass
    };
    let cfg = ModelConfig {
        input: [5, 4, 1],
        conv_widths: [3, 4, 3, 3],
        dense_widths: [6, 5, 4],
        dropout: if (seed / 3) % 2 == 0 { 0.0 } else { 0.35 },
        batch_norm: (seed / 6) % 2 == 0,
        residual: (seed / 12) % 2 == 0,
        head,
        num_classes: 3,
        num_domains: 2,
        task_mode,
    };
    let b = 3usize;
    let n = b * 5 * 4;
    let batch =
        Tensor::new(vec![b, 5, 4, 1], (0..n).map(|_| uniform(&mut rng, 0.0, 1.0)).collect())
            .expect("probe batch");

    let out_width = if head == HeadKind::Ddc { 6 } else { 3 };
    let labels = match task_mode {
        TaskMode::Multiclass => {
            let mut data = vec![0.0; b * out_width];
            for s in 0..b {
                let hot = rng.random_range(0..out_width);
                data[s * out_width + hot] = 1.0;
            }
            Tensor::new(vec![b, out_width], data).expect("labels")
        }
        TaskMode::Multilabel => Tensor::new(
            vec![b, out_width],
            (0..b * out_width).map(|_| f64::from(rng.random::<bool>())).collect(),
        )
        .expect("labels"),
    };
    let weights: Vec<f64> = (0..b).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
    let domain_ids =
        (head == HeadKind::Dic).then(|| (0..b).map(|_| rng.random_range(0..2usize)).collect());

    let mut model = build_model(&cfg, seed.wrapping_mul(31).wrapping_add(1)).expect("probe model");
    // Keep ReLU units alive and off the kink.
    for (name, t) in model.params_mut().iter_mut() {
        if name.ends_with(".b") || name.ends_with(".beta") {
            for v in t.data_mut() {
                *v += uniform(&mut rng, 0.1, 0.3);
            }
        }
    }
    (
        Probe { cfg, batch, labels, weights, domain_ids, dropout_seed: subseed(seed, "drop") },
        model,
    )
}

fn loss_at(probe: &Probe, model: &Model) -> f64 {
    let mut m = model.clone();
    let opts = ForwardOpts {
        training: true,
        dropout_seed: probe.dropout_seed,
        domain_ids: probe.domain_ids.clone(),
    };
    let (logits, _) = m.forward(&probe.batch, &opts).expect("probe forward");
    match probe.cfg.task_mode {
        TaskMode::Multiclass => {
            loss_softmax_ce(&logits, &probe.labels, &probe.weights).expect("loss").0
        }
        TaskMode::Multilabel => loss_sigmoid_bce(&logits, &probe.labels).expect("loss").0,
    }
}

/// Max relative error between the taped gradient and central differences
/// on `coords_per_param` random coordinates of every parameter.
pub fn check_model_probe(seed: u64, coords_per_param: usize) -> f64 {
    let (probe, model) = make_probe(seed);
    let grads = {
        let mut m = model.clone();
        let opts = ForwardOpts {
            training: true,
            dropout_seed: probe.dropout_seed,
            domain_ids: probe.domain_ids.clone(),
        };
        let (logits, tape) = m.forward(&probe.batch, &opts).expect("probe forward");
        let (_, dlogits) = match probe.cfg.task_mode {
            TaskMode::Multiclass => {
                loss_softmax_ce(&logits, &probe.labels, &probe.weights).expect("loss")
            }
            TaskMode::Multilabel => loss_sigmoid_bce(&logits, &probe.labels).expect("loss"),
        };
        tape.backward(&dlogits).expect("backward")
    };

    let mut rng = rng_from_seed(subseed(seed, "coords"));
    let mut worst: f64 = 0.0;
    let names: Vec<String> = model.params().names().map(str::to_string).collect();
    for name in &names {
        let len = model.params().get(name).expect("param").len();
        let g = grads.get(name).expect("gradient entry");
        for _ in 0..coords_per_param.min(len) {
            let i = rng.random_range(0..len);
            let central = |h: f64| {
                let mut plus = model.clone();
                plus.params_mut().get_mut(name).expect("param").data_mut()[i] += h;
                let mut minus = model.clone();
                minus.params_mut().get_mut(name).expect("param").data_mut()[i] -= h;
                (loss_at(&probe, &plus) - loss_at(&probe, &minus)) / (2.0 * h)
            };
            let n_full = central(FD_STEP);
            let n_quarter = central(FD_STEP / 4.0);
            // Central differences are only meaningful where the loss is
            // locally smooth; a ReLU kink or pooling argmax tie inside the
            // probe interval makes the two step sizes disagree. Those are
            // measure-zero points, not gradient defects; skip them.
            let spread = (n_full - n_quarter).abs();
            if spread > 0.01 * n_full.abs().max(n_quarter.abs()).max(1e-6) {
                continue;
            }
            worst = worst.max(rel_err(g.data()[i], n_quarter));
        }
    }
    worst
}

fn random_params(rng: &mut crate::rng::SeededRng, n: usize) -> ParameterSet {
    let mut p = ParameterSet::new();
    p.insert("w", Tensor::vector(&(0..n).map(|_| uniform(rng, -1.0, 1.0)).collect::<Vec<_>>()))
        .expect("unique");
    p.insert(
        "b",
        Tensor::vector(&(0..n / 2 + 1).map(|_| uniform(rng, -1.0, 1.0)).collect::<Vec<_>>()),
    )
    .expect("unique");
    p
}

fn random_importance(rng: &mut crate::rng::SeededRng, like: &ParameterSet) -> Importance {
    let mut imp = Importance::new();
    for (name, t) in like.iter() {
        imp.insert(
            name,
            Tensor::vector(&(0..t.len()).map(|_| uniform(rng, 0.0, 2.0)).collect::<Vec<_>>()),
        );
    }
    imp
}

fn fd_penalty(
    penalty: impl Fn(&ParameterSet) -> f64,
    grad: impl Fn(&ParameterSet) -> Gradients,
    params: &ParameterSet,
) -> f64 {
    let analytic = grad(params);
    let mut worst: f64 = 0.0;
    for (name, t) in params.iter() {
        for i in 0..t.len() {
            let mut plus = params.clone();
            plus.get_mut(name).expect("param").data_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.get_mut(name).expect("param").data_mut()[i] -= FD_STEP;
            let numeric = (penalty(&plus) - penalty(&minus)) / (2.0 * FD_STEP);
            let a = analytic.get(name).map(|g| g.data()[i]).unwrap_or(0.0);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Max relative FD error across the four penalty gradients (EWC, online
/// EWC, SI, MAS) on random anchors/importances.
pub fn check_penalty_probe(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let anchor = random_params(&mut rng, 7);
    let theta = random_params(&mut rng, 7);
    let fisher = random_importance(&mut rng, &anchor);
    let lambda = uniform(&mut rng, 0.1, 10.0);
    let mut worst: f64 = 0.0;

    let mut ewc = EwcConsolidation::new();
    let anchor2 = random_params(&mut rng, 7);
    let fisher2 = random_importance(&mut rng, &anchor);
    ewc.push_task(anchor.clone(), fisher.clone());
    ewc.push_task(anchor2, fisher2);
    worst = worst.max(fd_penalty(
        |p| ewc.penalty(p, lambda),
        |p| {
            let mut g = Gradients::new();
            ewc.penalty_grad(p, lambda, &mut g);
            g
        },
        &theta,
    ));

    let mut online = EwcOnlineState::new(0.8).expect("gamma");
    online.update(&fisher, &anchor);
    worst = worst.max(fd_penalty(
        |p| online.penalty(p, lambda),
        |p| {
            let mut g = Gradients::new();
            online.penalty_grad(p, lambda, &mut g);
            g
        },
        &theta,
    ));

    let si = SiState::from_parts(0.1, anchor.clone(), fisher.clone()).expect("xi");
    worst = worst.max(fd_penalty(
        |p| si.penalty(p, lambda),
        |p| {
            let mut g = Gradients::new();
            si.penalty_grad(p, lambda, &mut g);
            g
        },
        &theta,
    ));

    let mas = MasState::from_parts(anchor.clone(), fisher);
    worst = worst.max(fd_penalty(
        |p| mas.penalty(p, lambda),
        |p| {
            let mut g = Gradients::new();
            mas.penalty_grad(p, lambda, &mut g);
            g
        },
        &theta,
    ));
    worst
}
