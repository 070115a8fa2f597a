//! Non-CL comparison methods: the finetune baseline, offline training,
//! strategic sampling weights, and ddc/dic training wiring.

use crate::data::TaskStream;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::training::{run_cl, run_union, RunArtifacts, TrainConfig, UnionKind};
use std::collections::BTreeMap;

/// Inverse-occurrence weights: w_d = total / (n_domains * count_d), so a
/// perfectly balanced dataset gives weight 1 everywhere and count_d * w_d
/// is constant across domains. Domains with zero count are excluded with a
/// warning (their weight is undefined).
pub fn compute_ss_weights(counts: &BTreeMap<String, usize>) -> Result<BTreeMap<String, f64>> {
    let included: Vec<(&String, usize)> =
        counts.iter().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).collect();
    if included.is_empty() {
        return Err(Error::Input("strategic sampling needs at least one populated domain".into()));
    }
    for (name, &c) in counts {
        if c == 0 {
            log::warn!("strategic sampling: domain '{name}' has no samples; weight undefined, excluded");
        }
    }
    let total: usize = included.iter().map(|(_, c)| c).sum();
    let n = included.len();
    Ok(included
        .into_iter()
        .map(|(name, c)| (name.clone(), total as f64 / (n as f64 * c as f64)))
        .collect())
}

/// Sequential training with plain task loss and no knowledge preservation.
pub fn run_finetune(model: &mut Model, stream: &TaskStream, tc: &TrainConfig) -> Result<RunArtifacts> {
    run_cl(model, stream, tc, None)
}

/// One training phase over the shuffled union of all tasks, evaluated per
/// domain split.
pub fn run_offline(model: &mut Model, stream: &TaskStream, tc: &TrainConfig) -> Result<RunArtifacts> {
    run_union(model, stream, tc, UnionKind::Offline)
}

/// Union training with the loss weighted inversely to domain occurrence.
pub fn run_ss(model: &mut Model, stream: &TaskStream, tc: &TrainConfig) -> Result<RunArtifacts> {
    run_union(model, stream, tc, UnionKind::StrategicSampling)
}

/// Union training on joint (domain, class) targets of width N*M, decoded
/// back to class probabilities at evaluation.
pub fn run_ddc(model: &mut Model, stream: &TaskStream, tc: &TrainConfig) -> Result<RunArtifacts> {
    run_union(model, stream, tc, UnionKind::Ddc)
}

/// Union training routing each sample through its own domain's head;
/// inference sums the head logits.
pub fn run_dic(model: &mut Model, stream: &TaskStream, tc: &TrainConfig) -> Result<RunArtifacts> {
    run_union(model, stream, tc, UnionKind::Dic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn balanced_counts_give_unit_weights() {
        let mut counts = BTreeMap::new();
        counts.insert("A".to_string(), 500usize);
        counts.insert("B".to_string(), 500usize);
        let w = compute_ss_weights(&counts).unwrap();
        assert_eq!(w["A"], 1.0);
        assert_eq!(w["B"], 1.0);
    }

    #[test]
    fn skewed_counts_direct_formula() {
        let mut counts = BTreeMap::new();
        counts.insert("A".to_string(), 800usize);
        counts.insert("B".to_string(), 200usize);
        let w = compute_ss_weights(&counts).unwrap();
        assert!((w["A"] - 0.625).abs() < 1e-12);
        assert!((w["B"] - 2.5).abs() < 1e-12);
    }

    // Algebraic identity: count_i * w_i is the same for every domain and
    // the weighted mass sums back to the total.
    #[test]
    fn weighted_mass_is_preserved() {
        let mut rng = rng_from_seed(13);
        let mut counts = BTreeMap::new();
        for name in ["A", "B", "C"] {
            counts.insert(name.to_string(), rng.random_range(10..1000usize));
        }
        let total: usize = counts.values().sum();
        let w = compute_ss_weights(&counts).unwrap();
        let products: Vec<f64> = counts.iter().map(|(k, &c)| c as f64 * w[k]).collect();
        for p in &products {
            assert!((p - products[0]).abs() < 1e-9);
        }
        let mass: f64 = products.iter().sum();
        assert!((mass - total as f64).abs() < 1e-9);
    }

    // A one-domain union is the same computation as finetuning on that
    // single task: same init at matched seeds, same schedule, same data.
    #[test]
    fn offline_on_one_domain_equals_finetune() {
        use crate::data::{split_stream, Attribute, LabelData, Sample, Split};
        use crate::model::{build_model, HeadKind, ModelConfig, TaskMode};
        use crate::tensor::Tensor;
        use crate::training::TrainConfig;

        let mut rng = rng_from_seed(5);
        let samples: Vec<Sample> = (0..30)
            .map(|k| Sample {
                id: format!("s{k}"),
                input: Tensor::new(
                    vec![4, 4, 1],
                    (0..16).map(|_| rng.random::<f64>()).collect(),
                )
                .unwrap(),
                label: LabelData::Class(k % 2),
                gender: "Only".into(),
                race: "NA".into(),
                subject: None,
                split: if k % 5 == 4 { Split::Test } else { Split::Train },
            })
            .collect();
        let vocab = vec!["Only".to_string()];
        let stream = split_stream(&samples, &vocab, Attribute::Gender, &vocab.clone()).unwrap();
        let cfg = ModelConfig {
            input: [4, 4, 1],
            conv_widths: [2, 2, 2, 2],
            dense_widths: [4, 4, 4],
            dropout: 0.0,
            batch_norm: true,
            residual: false,
            head: HeadKind::Single,
            num_classes: 2,
            num_domains: 1,
            task_mode: TaskMode::Multiclass,
        };
        let tc = TrainConfig { epochs: 2, batch_size: 8, learning_rate: 1e-3, augment: false, seed: 3 };

        let mut a = build_model(&cfg, 11).unwrap();
        let mut b = build_model(&cfg, 11).unwrap();
        assert_eq!(a.params(), b.params(), "matched seeds share initialization");
        let fine = run_finetune(&mut a, &stream, &tc).unwrap();
        let off = run_offline(&mut b, &stream, &tc).unwrap();
        assert_eq!(fine.log.step_losses, off.log.step_losses);
        assert_eq!(fine.domain_accs, off.domain_accs);
    }

    #[test]
    fn zero_count_domain_excluded_with_defined_weights() {
        let mut counts = BTreeMap::new();
        counts.insert("A".to_string(), 100usize);
        counts.insert("B".to_string(), 0usize);
        let w = compute_ss_weights(&counts).unwrap();
        assert!(!w.contains_key("B"));
        assert_eq!(w["A"], 1.0);
        assert!(w.values().all(|v| v.is_finite() && *v > 0.0));
    }
}
