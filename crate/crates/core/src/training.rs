//! Shared training loops: the sequential (domain-incremental) runner and
//! the union (offline-style) runner.
//!
//! Every stochastic choice is derived from the run seed through tagged
//! sub-seeds, so a (config, seed) pair reproduces bit-identically across
//! processes.

use crate::adam::{adam_step, AdamState};
use crate::data::{augment, batch_inputs, batch_labels, Sample, TaskStream};
use crate::error::{Error, Result};
use crate::loss::{loss_sigmoid_bce, loss_softmax_ce};
use crate::metrics::{accuracy, AccuracyMatrix};
use crate::model::{ForwardOpts, HeadKind, Model, TaskMode};
use crate::rng::{shuffled_indices, subrng, subseed};
use crate::strategies::{interleave_batch, StrategyConfig, StrategyState};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

const AUGMENT_FLIP_P: f64 = 0.5;
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub augment: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Non-CL union training variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnionKind {
    Offline,
    StrategicSampling,
    Ddc,
    Dic,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// Total loss (task + penalty) per optimizer step.
    pub step_losses: Vec<f64>,
    /// Batches that could not be mixed with replay (empty buffer).
    pub batches_without_replay: usize,
    /// (new, replayed) composition of every mixed batch.
    pub replay_mix: Vec<(usize, usize)>,
    /// Largest replay buffer size observed during the run.
    pub max_buffer_len: usize,
    pub notes: Vec<String>,
}

/// Outputs of one training run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Filled for sequential runs; None for union runs.
    pub matrix: Option<AccuracyMatrix>,
    /// Final per-domain test accuracies (same splits for every method).
    pub domain_accs: BTreeMap<String, f64>,
    /// Multilabel runs: per-label accuracy over the pooled test splits.
    pub per_label_accs: Option<Vec<f64>>,
    pub log: TrainLog,
}

/// Sequential domain-incremental run: train task by task with an optional
/// consolidation strategy, evaluating every learned task after each task.
pub fn run_cl(
    model: &mut Model,
    stream: &TaskStream,
    tc: &TrainConfig,
    strategy: Option<(&StrategyConfig, &mut StrategyState)>,
) -> Result<RunArtifacts> {
    tc.validate()?;
    if stream.is_empty() {
        return Err(Error::Input("empty task stream".into()));
    }
    let n_tasks = stream.len();
    let mut matrix = AccuracyMatrix::new(n_tasks);
    let mut log = TrainLog::default();
    let mut adam = AdamState::new(model.params());
    let mut strategy = strategy;

    for (t, task) in stream.tasks.iter().enumerate() {
        if task.train.is_empty() {
            return Err(Error::Input(format!("task '{}' has no training samples", task.name)));
        }
        if let Some((_, state)) = strategy.as_mut() {
            state.begin_task(model.params());
        }
        let phase_strategy = strategy.as_mut().map(|(c, s)| (*c, &mut **s));
        train_phase(
            model,
            &mut adam,
            &task.train,
            tc,
            t,
            stream.attribute,
            phase_strategy,
            None,
            &mut log,
        )?;
        if let Some((_, state)) = strategy.as_mut() {
            state.consolidate(model, &task.train)?;
        }
        for (j, earlier) in stream.tasks.iter().take(t + 1).enumerate() {
            let acc = evaluate_accuracy(model, &earlier.test)?;
            matrix.set(j, t, acc)?;
        }
    }

    let mut domain_accs = BTreeMap::new();
    for (j, task) in stream.tasks.iter().enumerate() {
        domain_accs.insert(
            task.name.clone(),
            matrix.get(j, n_tasks - 1).expect("final column filled"),
        );
    }
    let per_label_accs = per_label_breakdown(model, stream)?;
    Ok(RunArtifacts { matrix: Some(matrix), domain_accs, per_label_accs, log })
}

/// Union run: one training phase over the shuffled union of all tasks'
/// training data, evaluated per domain on the same held-out splits the
/// sequential runner uses.
pub fn run_union(
    model: &mut Model,
    stream: &TaskStream,
    tc: &TrainConfig,
    kind: UnionKind,
) -> Result<RunArtifacts> {
    tc.validate()?;
    if stream.is_empty() {
        return Err(Error::Input("empty task stream".into()));
    }
    let union = stream.union_train();
    if union.is_empty() {
        return Err(Error::Input("union has no training samples".into()));
    }
    expect_head(model, kind)?;

    let mut log = TrainLog::default();
    let mut adam = AdamState::new(model.params());

    let ss_weights = match kind {
        UnionKind::StrategicSampling => {
            let counts: BTreeMap<String, usize> = stream.train_counts();
            Some(crate::baselines::compute_ss_weights(&counts)?)
        }
        _ => None,
    };
    let domain_index: BTreeMap<String, usize> =
        stream.tasks.iter().enumerate().map(|(i, t)| (t.name.clone(), i)).collect();
    let routing = match kind {
        UnionKind::Ddc => Some(Routing::JointTargets(&domain_index)),
        UnionKind::Dic => Some(Routing::HeadIds(&domain_index)),
        _ => ss_weights.as_ref().map(Routing::SampleWeights),
    };

    train_phase(model, &mut adam, &union, tc, 0, stream.attribute, None, routing, &mut log)?;

    let mut domain_accs = BTreeMap::new();
    for task in &stream.tasks {
        domain_accs.insert(task.name.clone(), evaluate_accuracy(model, &task.test)?);
    }
    let per_label_accs = per_label_breakdown(model, stream)?;
    Ok(RunArtifacts { matrix: None, domain_accs, per_label_accs, log })
}

/// Per-label accuracy over every task's test split; multilabel mode only.
fn per_label_breakdown(model: &Model, stream: &TaskStream) -> Result<Option<Vec<f64>>> {
    if model.config().task_mode != TaskMode::Multilabel {
        return Ok(None);
    }
    let width = model.config().num_classes;
    let mut totals = vec![0.0; width];
    let mut n = 0usize;
    for task in &stream.tasks {
        for chunk in task.test.chunks(EVAL_BATCH) {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let x = batch_inputs(&refs)?;
            let scores = model.decision_scores(&x)?;
            let labels = batch_labels(&refs, width)?;
            let per = crate::metrics::per_label_accuracy(&scores, &labels)?;
            for (t, p) in totals.iter_mut().zip(per) {
                *t += p * chunk.len() as f64;
            }
            n += chunk.len();
        }
    }
    Ok(Some(totals.into_iter().map(|t| t / n as f64).collect()))
}

fn expect_head(model: &Model, kind: UnionKind) -> Result<()> {
    let expected = match kind {
        UnionKind::Ddc => HeadKind::Ddc,
        UnionKind::Dic => HeadKind::Dic,
        _ => HeadKind::Single,
    };
    if model.config().head != expected {
        return Err(Error::Config(format!(
            "{kind:?} run requires a {expected:?} head, model has {:?}",
            model.config().head
        )));
    }
    Ok(())
}

/// Head-specific batch treatment for union runs.
enum Routing<'a> {
    /// Per-sample loss weights keyed by domain (strategic sampling).
    SampleWeights(&'a BTreeMap<String, f64>),
    /// Joint (domain, class) one-hot targets of width N*M (ddc).
    JointTargets(&'a BTreeMap<String, usize>),
    /// Per-sample head routing (dic).
    HeadIds(&'a BTreeMap<String, usize>),
}

#[allow(clippy::too_many_arguments)]
fn train_phase(
    model: &mut Model,
    adam: &mut AdamState,
    samples: &[Sample],
    tc: &TrainConfig,
    phase: usize,
    attribute: crate::data::Attribute,
    mut strategy: Option<(&StrategyConfig, &mut StrategyState)>,
    routing: Option<Routing<'_>>,
    log: &mut TrainLog,
) -> Result<()> {
    let num_classes = model.config().num_classes;
    let mode = model.config().task_mode;
    let mut step_counter = 0usize;

    for epoch in 0..tc.epochs {
        let epoch_samples = if tc.augment {
            augment(samples, AUGMENT_FLIP_P, subseed(tc.seed, &format!("aug.{phase}.{epoch}")))
        } else {
            samples.to_vec()
        };
        let mut order_rng = subrng(tc.seed, &format!("shuffle.{phase}.{epoch}"));
        let order = shuffled_indices(epoch_samples.len(), &mut order_rng);

        for chunk in order.chunks(tc.batch_size) {
            let mut batch: Vec<Sample> =
                chunk.iter().map(|&i| epoch_samples[i].clone()).collect();

            if let Some((_, state)) = strategy.as_ref() {
                if let Some(buf) = state.replay_buffer() {
                    let new_ids: std::collections::BTreeSet<String> =
                        batch.iter().map(|s| s.id.clone()).collect();
                    let (mixed, replayed) = interleave_batch(
                        batch,
                        buf,
                        subseed(tc.seed, &format!("replay.{phase}.{epoch}.{step_counter}")),
                    )?;
                    batch = mixed;
                    log.max_buffer_len = log.max_buffer_len.max(buf.len());
                    if replayed {
                        let n_new =
                            batch.iter().filter(|s| new_ids.contains(&s.id)).count();
                        log.replay_mix.push((n_new, batch.len() - n_new));
                    } else {
                        log.batches_without_replay += 1;
                    }
                }
            }

            let refs: Vec<&Sample> = batch.iter().collect();
            let x = batch_inputs(&refs)?;
            let dropout_seed = subseed(tc.seed, &format!("drop.{phase}.{epoch}.{step_counter}"));
            let mut opts = ForwardOpts::train(dropout_seed);
            let targets;
            let mut weights = vec![1.0; refs.len()];

            match &routing {
                Some(Routing::JointTargets(domain_index)) => {
                    targets = joint_targets(&refs, domain_index, attribute, num_classes, mode)?;
                }
                Some(Routing::HeadIds(domain_index)) => {
                    let ids = refs
                        .iter()
                        .map(|s| {
                            domain_index.get(s.attribute_value(attribute)).copied().ok_or_else(
                                || {
                                    Error::Input(format!(
                                        "sample '{}' missing a domain label known to the stream",
                                        s.id
                                    ))
                                },
                            )
                        })
                        .collect::<Result<Vec<usize>>>()?;
                    opts.domain_ids = Some(ids);
                    targets = batch_labels(&refs, num_classes)?;
                }
                Some(Routing::SampleWeights(w)) => {
                    for (i, s) in refs.iter().enumerate() {
                        weights[i] = w
                            .get(s.attribute_value(attribute))
                            .copied()
                            .ok_or_else(|| {
                                Error::Input(format!(
                                    "sample '{}' has domain '{}' without a sampling weight",
                                    s.id,
                                    s.attribute_value(attribute)
                                ))
                            })?;
                    }
                    targets = batch_labels(&refs, num_classes)?;
                }
                None => {
                    targets = batch_labels(&refs, num_classes)?;
                }
            }

            let (logits, tape) = model.forward(&x, &opts)?;
            let (task_loss, dlogits) = match mode {
                TaskMode::Multiclass => loss_softmax_ce(&logits, &targets, &weights)?,
                TaskMode::Multilabel => weighted_bce(&logits, &targets, &weights)?,
            };
            if !task_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at phase {phase}, step {step_counter}"
                )));
            }
            let mut grads = tape.backward(&dlogits)?;

            let mut penalty = 0.0;
            let task_grads = if let Some((cfg, state)) = strategy.as_mut() {
                let keep = matches!(**state, StrategyState::Si(_)).then(|| grads.clone());
                penalty = state.penalty(model.params(), cfg);
                state.penalty_grad(model.params(), cfg, &mut grads);
                keep
            } else {
                None
            };

            let before = task_grads.is_some().then(|| model.params().snapshot());
            adam_step(model.params_mut(), &grads, adam, tc.learning_rate).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!(
                    "{msg} (phase {phase}, step {step_counter})"
                )),
                other => other,
            })?;

            if let (Some((_, state)), Some(tg), Some(before)) =
                (strategy.as_mut(), task_grads.as_ref(), before.as_ref())
            {
                state.on_step(tg, before, model.params());
            }

            log.step_losses.push(task_loss + penalty);
            step_counter += 1;
        }
    }
    Ok(())
}

/// Joint ddc targets: index = domain_id * M + class in multiclass mode;
/// in multilabel mode the sample's domain block carries its bits.
fn joint_targets(
    refs: &[&Sample],
    domain_index: &BTreeMap<String, usize>,
    attribute: crate::data::Attribute,
    num_classes: usize,
    mode: TaskMode,
) -> Result<Tensor> {
    let n_domains = domain_index.len();
    let width = n_domains * num_classes;
    let mut data = vec![0.0; refs.len() * width];
    for (i, s) in refs.iter().enumerate() {
        let d = *domain_index.get(s.attribute_value(attribute)).ok_or_else(
            || Error::Input(format!("sample '{}' missing a domain label", s.id)),
        )?;
        match (&s.label, mode) {
            (crate::data::LabelData::Class(c), TaskMode::Multiclass) => {
                data[i * width + d * num_classes + c] = 1.0;
            }
            (crate::data::LabelData::MultiHot(bits), TaskMode::Multilabel) => {
                for (l, &b) in bits.iter().enumerate() {
                    data[i * width + d * num_classes + l] = f64::from(b);
                }
            }
            _ => return Err(Error::Input(format!("sample '{}' mixes label modes", s.id))),
        }
    }
    Tensor::new(vec![refs.len(), width], data)
}

/// Per-sample weighted binary cross-entropy (mean over cells). With unit
/// weights this is exactly [`loss_sigmoid_bce`].
fn weighted_bce(logits: &Tensor, labels: &Tensor, weights: &[f64]) -> Result<(f64, Tensor)> {
    if weights.iter().all(|&w| w == 1.0) {
        return loss_sigmoid_bce(logits, labels);
    }
    let (b, l) = (logits.shape()[0], logits.shape()[1]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; b * l];
    let n = (b * l) as f64;
    for s in 0..b {
        let row_logits = logits.row(s);
        let row_labels = labels.row(s);
        for j in 0..l {
            let (z, y) = (row_logits[j], row_labels[j]);
            if y != 0.0 && y != 1.0 {
                return Err(Error::Input(format!("label {y} is not in {{0,1}}")));
            }
            loss += weights[s] * (z.max(0.0) - y * z + (-z.abs()).exp().ln_1p());
            grad[s * l + j] = weights[s] * (crate::loss::sigmoid(z) - y) / n;
        }
    }
    Ok((loss / n, Tensor::new(vec![b, l], grad)?))
}

/// Accuracy of a model on held-out samples, evaluated in fixed-size
/// chunks with the head-appropriate decision scores.
pub fn evaluate_accuracy(model: &Model, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty test split".into()));
    }
    let mode = model.config().task_mode;
    let num_classes = model.config().num_classes;
    let mut correct_weighted = 0.0;
    let mut total = 0usize;
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let x = batch_inputs(&refs)?;
        let scores = model.decision_scores(&x)?;
        let labels = batch_labels(&refs, num_classes)?;
        let acc = accuracy(&scores, &labels, mode)?;
        let weight = match mode {
            TaskMode::Multiclass => chunk.len(),
            TaskMode::Multilabel => chunk.len() * labels.shape()[1],
        };
        correct_weighted += acc * weight as f64;
        total += weight;
    }
    Ok(correct_weighted / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_stream, Attribute, LabelData, Split};
    use crate::model::{build_model, ModelConfig};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn tiny_model_cfg(head: HeadKind, n_domains: usize) -> ModelConfig {
        ModelConfig {
            input: [4, 4, 1],
            conv_widths: [2, 2, 2, 2],
            dense_widths: [6, 6, 6],
            dropout: 0.0,
            batch_norm: false,
            residual: false,
            head,
            num_classes: 2,
            num_domains: n_domains,
            task_mode: TaskMode::Multiclass,
        }
    }

    fn toy_stream(n_per_cell: usize, seed: u64) -> TaskStream {
        let mut rng = rng_from_seed(seed);
        let mut samples = Vec::new();
        for (d, name) in ["A", "B"].iter().enumerate() {
            for c in 0..2usize {
                for k in 0..n_per_cell {
                    let base = 0.2 + 0.3 * c as f64 + 0.25 * d as f64;
                    let data: Vec<f64> =
                        (0..16).map(|_| (base + 0.05 * rng.random::<f64>()).clamp(0.0, 1.0)).collect();
                    samples.push(Sample {
                        id: format!("{name}{c}{k}"),
                        input: Tensor::new(vec![4, 4, 1], data).unwrap(),
                        label: LabelData::Class(c),
                        gender: name.to_string(),
                        race: "NA".into(),
                        subject: None,
                        split: if k % 5 == 4 { Split::Test } else { Split::Train },
                    });
                }
            }
        }
        let vocab = vec!["A".to_string(), "B".to_string()];
        split_stream(&samples, &vocab, Attribute::Gender, &vocab.clone()).unwrap()
    }

    fn tc(seed: u64) -> TrainConfig {
        TrainConfig { epochs: 2, batch_size: 8, learning_rate: 1e-3, augment: false, seed }
    }

    #[test]
    fn finetune_fills_the_triangle() {
        let stream = toy_stream(10, 3);
        let mut model = build_model(&tiny_model_cfg(HeadKind::Single, 1), 5).unwrap();
        let out = run_cl(&mut model, &stream, &tc(1), None).unwrap();
        let m = out.matrix.unwrap();
        assert!(m.is_complete());
        assert!(m.get(1, 0).is_none(), "upper-right only");
        assert_eq!(out.domain_accs.len(), 2);
    }

    #[test]
    fn single_task_stream_is_plain_training() {
        let mut samples = Vec::new();
        let full = toy_stream(10, 3);
        samples.extend(full.tasks[0].train.iter().cloned());
        samples.extend(full.tasks[0].test.iter().cloned());
        let vocab = vec!["A".to_string()];
        let stream = split_stream(&samples, &vocab, Attribute::Gender, &vocab.clone()).unwrap();
        let mut model = build_model(&tiny_model_cfg(HeadKind::Single, 1), 5).unwrap();
        let out = run_cl(&mut model, &stream, &tc(1), None).unwrap();
        assert_eq!(out.matrix.unwrap().len(), 1);
    }

    #[test]
    fn runs_are_deterministic_in_config_and_seed() {
        let stream = toy_stream(8, 4);
        let run = || {
            let mut model = build_model(&tiny_model_cfg(HeadKind::Single, 1), 9).unwrap();
            run_union(&mut model, &stream, &tc(7), UnionKind::Offline).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.domain_accs, b.domain_accs);
        assert_eq!(a.log.step_losses, b.log.step_losses);
    }




    #[test]
    fn ddc_and_dic_union_runs_complete() {
        let stream = toy_stream(8, 6);
        let mut ddc = build_model(&tiny_model_cfg(HeadKind::Ddc, 2), 2).unwrap();
        let out = run_union(&mut ddc, &stream, &tc(2), UnionKind::Ddc).unwrap();
        assert_eq!(out.domain_accs.len(), 2);
        for v in out.domain_accs.values() {
            assert!((0.0..=1.0).contains(v));
        }
        let mut dic = build_model(&tiny_model_cfg(HeadKind::Dic, 2), 2).unwrap();
        let out = run_union(&mut dic, &stream, &tc(2), UnionKind::Dic).unwrap();
        assert_eq!(out.domain_accs.len(), 2);
    }

    #[test]
    fn head_mismatch_is_config_error() {
        let stream = toy_stream(6, 6);
        let mut single = build_model(&tiny_model_cfg(HeadKind::Single, 1), 2).unwrap();
        let err = run_union(&mut single, &stream, &tc(2), UnionKind::Ddc).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    // Degenerate-N equivalence: a 1-domain ddc model trained on joint
    // targets produces the same per-step losses as the single-head model.
    #[test]
    fn ddc_with_one_domain_matches_single_head_losses() {
        let full = toy_stream(10, 8);
        // Collapse to one domain so N = 1.
        let mut samples: Vec<Sample> = Vec::new();
        for t in &full.tasks {
            for s in t.train.iter().chain(&t.test) {
                let mut s = s.clone();
                s.gender = "A".to_string();
                samples.push(s);
            }
        }
        let vocab = vec!["A".to_string()];
        let stream = split_stream(&samples, &vocab, Attribute::Gender, &vocab.clone()).unwrap();

        let mut single = build_model(&tiny_model_cfg(HeadKind::Single, 1), 31).unwrap();
        let single_out = run_union(&mut single, &stream, &tc(5), UnionKind::Offline).unwrap();

        let mut ddc = build_model(&tiny_model_cfg(HeadKind::Ddc, 1), 31).unwrap();
        let ddc_out = run_union(&mut ddc, &stream, &tc(5), UnionKind::Ddc).unwrap();

        assert_eq!(single_out.log.step_losses.len(), ddc_out.log.step_losses.len());
        for (a, b) in single_out.log.step_losses.iter().zip(&ddc_out.log.step_losses) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    // Routing must follow the stream's attribute; a race-split stream with
    // constant gender exercises the non-default column.
    #[test]
    fn race_attribute_streams_route_correctly() {
        let mut rng = rng_from_seed(44);
        let mut samples = Vec::new();
        for (d, race) in ["White", "Black"].iter().enumerate() {
            for c in 0..2usize {
                for k in 0..10 {
                    let base = 0.2 + 0.3 * c as f64 + 0.25 * d as f64;
                    samples.push(Sample {
                        id: format!("{race}{c}{k}"),
                        input: Tensor::new(
                            vec![4, 4, 1],
                            (0..16)
                                .map(|_| (base + 0.05 * rng.random::<f64>()).clamp(0.0, 1.0))
                                .collect(),
                        )
                        .unwrap(),
                        label: LabelData::Class(c),
                        gender: "All".into(),
                        race: race.to_string(),
                        subject: None,
                        split: if k % 5 == 4 { Split::Test } else { Split::Train },
                    });
                }
            }
        }
        let vocab = vec!["White".to_string(), "Black".to_string()];
        let stream = split_stream(&samples, &vocab, Attribute::Race, &vocab.clone()).unwrap();

        for (head, kind) in [
            (HeadKind::Single, UnionKind::StrategicSampling),
            (HeadKind::Ddc, UnionKind::Ddc),
            (HeadKind::Dic, UnionKind::Dic),
        ] {
            let mut model = build_model(&tiny_model_cfg(head, 2), 3).unwrap();
            let out = run_union(&mut model, &stream, &tc(6), kind).unwrap();
            assert_eq!(out.domain_accs.len(), 2, "{kind:?}");
            assert!(out.domain_accs.contains_key("White"));
            assert!(out.domain_accs.contains_key("Black"));
        }
    }

    #[test]
    fn rehearsal_batches_mix_half_and_half() {
        let stream = toy_stream(30, 10);
        let cfg = StrategyConfig::new(crate::strategies::StrategyKind::Nr, 100.0);
        let mut state = StrategyState::new(&cfg, 99).unwrap();
        let mut model = build_model(&tiny_model_cfg(HeadKind::Single, 1), 4).unwrap();
        let tc = TrainConfig { epochs: 1, batch_size: 24, learning_rate: 1e-3, augment: false, seed: 3 };
        let out = run_cl(&mut model, &stream, &tc, Some((&cfg, &mut state))).unwrap();
        // Task 1 has no replay; every batch is counted as unmixed.
        assert!(out.log.batches_without_replay > 0);
        let buf = state.replay_buffer().unwrap();
        assert!(buf.len() > 0 && buf.len() <= 100);
    }
}
