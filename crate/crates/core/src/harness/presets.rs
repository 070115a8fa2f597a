//! Ready-to-run experiment configurations for the shipped synthetic
//! benchmarks, with per-benchmark tuned strategy coefficients.

use crate::error::{Error, Result};
use crate::harness::config::{DatasetSource, ExperimentConfig, Method};
use crate::model::{HeadKind, ModelConfig, TaskMode};
use crate::strategies::StrategyConfig;

pub const TWO_DOMAIN: &str = "two-domain";
pub const THREE_DOMAIN: &str = "three-domain-imbalanced";

/// Desk-scale model for the 8x8 synthetic benchmarks.
pub fn preset_model(num_domains: usize, head: HeadKind) -> ModelConfig {
    ModelConfig {
        input: [8, 8, 1],
        conv_widths: [4, 4, 8, 8],
        dense_widths: [32, 16, 8],
        dropout: 0.0,
        batch_norm: true,
        residual: false,
        head,
        num_classes: 4,
        num_domains,
        task_mode: TaskMode::Multiclass,
    }
}

/// Tuned strategy coefficient for a (benchmark, method) pair.
pub fn preset_coefficient(preset: &str, method: Method) -> Option<f64> {
    match (preset, method) {
        (TWO_DOMAIN, Method::Ewc) => Some(1e4),
        (TWO_DOMAIN, Method::EwcOnline) => Some(1e3),
        (TWO_DOMAIN, Method::Si) => Some(1e1),
        (TWO_DOMAIN, Method::Mas) => Some(1e1),
        (TWO_DOMAIN, Method::Nr) => Some(200.0),
        (THREE_DOMAIN, Method::Ewc) => Some(1e1),
        (THREE_DOMAIN, Method::EwcOnline) => Some(1e1),
        (THREE_DOMAIN, Method::Si) => Some(1e1),
        (THREE_DOMAIN, Method::Mas) => Some(1e1),
        (THREE_DOMAIN, Method::Nr) => Some(200.0),
        _ => None,
    }
}

/// Full experiment config for a shipped benchmark and method: 25 epochs
/// per task, batch 24, lr 3e-3, seeds {0, 1, 2}.
pub fn preset_experiment(preset: &str, method: Method) -> Result<ExperimentConfig> {
    let spec = DatasetSource::preset_spec(preset)?;
    let n_domains = spec.num_domains;
    let strategy = match method.strategy_kind() {
        Some(kind) => {
            let coeff = preset_coefficient(preset, method).ok_or_else(|| {
                Error::Config(format!(
                    "no tuned coefficient for method '{}' on preset '{preset}'",
                    method.name()
                ))
            })?;
            Some(StrategyConfig::new(kind, coeff))
        }
        None => None,
    };
    Ok(ExperimentConfig {
        dataset: DatasetSource::Preset { name: preset.to_string() },
        attribute: "gender".into(),
        task_order: None,
        method,
        strategy,
        model: preset_model(n_domains, method.required_head()),
        epochs: 25,
        batch_size: 24,
        learning_rate: 3e-3,
        augment: false,
        seeds: vec![0, 1, 2],
        output_dir: None,
        save_checkpoints: false,
    })
}
