//! Experiment execution: method x seed runs, metric extraction and
//! aggregation into a [`ResultBundle`].

use crate::baselines;
use crate::checkpoint::Checkpoint;
use crate::data::{load_manifest, split_stream, Attribute, DatasetManifest, PreprocessConfig, TaskStream};
use crate::error::{Error, Result};
use crate::harness::config::{DatasetSource, ExperimentConfig, Method};
use crate::metrics::{cf_score, fairness, overall_accuracy, AccuracyMatrix};
use crate::model::build_model;
use crate::rng::subseed;
use crate::strategies::StrategyState;
use crate::training::{run_cl, RunArtifacts, TrainConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Per-seed run outcome; everything needed to recompute the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Sequential runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<AccuracyMatrix>,
    pub domain_accs: BTreeMap<String, f64>,
    pub fairness: f64,
    /// Per task (1-based order); None where not applicable (task 1).
    pub cf: Vec<Option<f64>>,
    pub overall: Vec<f64>,
    /// Multilabel runs: per-label accuracy over the pooled test splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_label_accs: Option<Vec<f64>>,
    pub batches_without_replay: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub domain_acc_mean: BTreeMap<String, f64>,
    pub domain_acc_std: BTreeMap<String, f64>,
    pub fairness_mean: f64,
    pub fairness_std: f64,
    /// Mean over domains of the mean per-domain accuracy.
    pub mean_accuracy: f64,
    pub cf_mean: Vec<Option<f64>>,
    pub overall_mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config_hash: String,
    pub method: Method,
    pub attribute: String,
    pub task_names: Vec<String>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub summary: Summary,
}

impl ResultBundle {
    /// A bundle is complete when every configured seed has a result and
    /// every sequential matrix has its full triangle.
    pub fn completeness_errors(&self) -> Vec<String> {
        let mut missing = Vec::new();
        if self.per_seed.len() != self.seeds.len() {
            missing.push(format!(
                "{} of {} seed results present",
                self.per_seed.len(),
                self.seeds.len()
            ));
        }
        for sr in &self.per_seed {
            if let Some(m) = &sr.matrix {
                for (eval, after) in m.missing_cells() {
                    missing.push(format!("seed {}: matrix cell (eval {eval}, after {after})", sr.seed));
                }
            }
            if sr.domain_accs.is_empty() {
                missing.push(format!("seed {}: no per-domain accuracies", sr.seed));
            }
        }
        missing
    }
}

/// Resolve the dataset source into a manifest.
pub fn resolve_dataset(source: &DatasetSource) -> Result<DatasetManifest> {
    match source {
        DatasetSource::Manifest { path } => load_manifest(path),
        DatasetSource::Synthetic { spec } => crate::data::generate_synthetic(spec),
        DatasetSource::Preset { name } => {
            crate::data::generate_synthetic(&DatasetSource::preset_spec(name)?)
        }
    }
}

/// Build the task stream for an experiment from its dataset and ordering.
pub fn build_stream(cfg: &ExperimentConfig, manifest: &DatasetManifest) -> Result<TaskStream> {
    let attribute = Attribute::parse(&cfg.attribute)?;
    if manifest.mode != cfg.model.task_mode {
        return Err(Error::Config(format!(
            "dataset is {:?} but the model is configured for {:?}",
            manifest.mode, cfg.model.task_mode
        )));
    }
    if manifest.num_labels != cfg.model.num_classes {
        return Err(Error::Config(format!(
            "dataset has {} labels, model expects {}",
            manifest.num_labels, cfg.model.num_classes
        )));
    }
    let vocab = manifest.vocabulary(&cfg.attribute)?.to_vec();
    let order = cfg.task_order.clone().unwrap_or_else(|| vocab.clone());
    let pp = PreprocessConfig::plain(cfg.model.input);
    let (samples, report) = manifest.resolve_samples(&pp)?;
    if report.undecodable > 0 {
        log::warn!("{} samples skipped as undecodable", report.undecodable);
    }
    split_stream(&samples, &vocab, attribute, &order)
}

fn run_one_seed(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> Result<RunArtifacts> {
    let mut model = build_model(&cfg.model, seed)?;
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        augment: cfg.augment,
        seed,
    };
    match cfg.method {
        Method::Baseline => baselines::run_finetune(&mut model, stream, &tc),
        Method::Offline => baselines::run_offline(&mut model, stream, &tc),
        Method::Ss => baselines::run_ss(&mut model, stream, &tc),
        Method::Ddc => baselines::run_ddc(&mut model, stream, &tc),
        Method::Dic => baselines::run_dic(&mut model, stream, &tc),
        Method::Ewc | Method::EwcOnline | Method::Si | Method::Mas | Method::Nr => {
            let scfg = cfg.strategy.as_ref().expect("validated");
            let mut state = StrategyState::new(scfg, subseed(seed, "replay"))?;
            let out = run_cl(&mut model, stream, &tc, Some((scfg, &mut state)))?;
            if cfg.save_checkpoints {
                if let Err(e) = save_seed_checkpoint(cfg, seed, &model, Some(state)) {
                    log::warn!("checkpoint save failed: {e}");
                }
            }
            return Ok(out);
        }
    }
    .map(|out| {
        if cfg.save_checkpoints {
            if let Err(e) = save_seed_checkpoint(cfg, seed, &model, None) {
                log::warn!("checkpoint save failed: {e}");
            }
        }
        out
    })
}

fn save_seed_checkpoint(
    cfg: &ExperimentConfig,
    seed: u64,
    model: &crate::model::Model,
    strategy: Option<StrategyState>,
) -> Result<()> {
    let Some(dir) = run_dir(cfg) else { return Ok(()) };
    let path = dir.join(format!("seed_{seed}")).join("checkpoint.json");
    let mut ck = Checkpoint::new(model.clone());
    ck.strategy = strategy;
    ck.save(&path)
}

/// Directory for this run's artifacts: output_dir/method/attribute.
pub fn run_dir(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.output_dir.as_ref().map(|d| d.join(cfg.method.name()).join(&cfg.attribute))
}

fn seed_result(stream: &TaskStream, seed: u64, artifacts: &RunArtifacts) -> Result<SeedResult> {
    let n = stream.len();
    let fairness_score = fairness(&artifacts.domain_accs)?;
    let (cf, overall) = match &artifacts.matrix {
        Some(m) => {
            let cf: Vec<Option<f64>> = (1..=n).map(|i| cf_score(m, i)).collect();
            let overall: Vec<f64> = (1..=n)
                .map(|i| overall_accuracy(m, i).expect("complete matrix"))
                .collect();
            (cf, overall)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(SeedResult {
        seed,
        matrix: artifacts.matrix.clone(),
        domain_accs: artifacts.domain_accs.clone(),
        fairness: fairness_score,
        cf,
        overall,
        per_label_accs: artifacts.per_label_accs.clone(),
        batches_without_replay: artifacts.log.batches_without_replay,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Std over the seed set itself (population convention): matches the
    // 3-seed reporting style of the reference tables.
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(task_names: &[String], per_seed: &[SeedResult]) -> Summary {
    let mut domain_acc_mean = BTreeMap::new();
    let mut domain_acc_std = BTreeMap::new();
    for name in task_names {
        let vals: Vec<f64> = per_seed.iter().filter_map(|s| s.domain_accs.get(name).copied()).collect();
        let (m, s) = mean_std(&vals);
        domain_acc_mean.insert(name.clone(), m);
        domain_acc_std.insert(name.clone(), s);
    }
    let fairness_vals: Vec<f64> = per_seed.iter().map(|s| s.fairness).collect();
    let (fairness_mean, fairness_std) = mean_std(&fairness_vals);
    let mean_accuracy =
        domain_acc_mean.values().sum::<f64>() / domain_acc_mean.len().max(1) as f64;

    let n_tasks = per_seed.first().map(|s| s.cf.len()).unwrap_or(0);
    let cf_mean: Vec<Option<f64>> = (0..n_tasks)
        .map(|t| {
            let vals: Vec<f64> = per_seed.iter().filter_map(|s| s.cf.get(t).copied().flatten()).collect();
            if vals.is_empty() {
                None
            } else {
                Some(mean_std(&vals).0)
            }
        })
        .collect();
    let overall_mean: Vec<f64> = (0..n_tasks)
        .map(|t| {
            let vals: Vec<f64> = per_seed.iter().filter_map(|s| s.overall.get(t).copied()).collect();
            mean_std(&vals).0
        })
        .collect();

    Summary {
        domain_acc_mean,
        domain_acc_std,
        fairness_mean,
        fairness_std,
        mean_accuracy,
        cf_mean,
        overall_mean,
    }
}

/// Run an experiment over all configured seeds and aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let manifest = resolve_dataset(&cfg.dataset)?;
    let stream = build_stream(cfg, &manifest)?;
    let task_names: Vec<String> = stream.tasks.iter().map(|t| t.name.clone()).collect();

    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let artifacts = run_one_seed(cfg, &stream, seed)?;
        per_seed.push(seed_result(&stream, seed, &artifacts)?);
    }
    let summary = summarize(&task_names, &per_seed);
    Ok(ResultBundle {
        config_hash: cfg.config_hash(),
        method: cfg.method,
        attribute: cfg.attribute.clone(),
        task_names,
        seeds: cfg.seeds.clone(),
        per_seed,
        summary,
    })
}

/// Run an experiment and persist `results.json` (deterministic) plus
/// `meta.json` (wall time; excluded from the deterministic artifact) under
/// output_dir/method/attribute/.
pub fn run_and_save(cfg: &ExperimentConfig) -> Result<(ResultBundle, Option<PathBuf>)> {
    let started = std::time::Instant::now();
    let bundle = run_experiment(cfg)?;
    let Some(dir) = run_dir(cfg) else {
        return Ok((bundle, None));
    };
    std::fs::create_dir_all(&dir)?;
    let results_path = dir.join("results.json");
    write_json(&results_path, &bundle)?;
    let meta = serde_json::json!({
        "config_hash": bundle.config_hash,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_json(&dir.join("meta.json"), &meta)?;
    Ok((bundle, Some(results_path)))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json)?;
    Ok(())
}
