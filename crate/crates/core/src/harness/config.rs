//! Experiment configuration: dataset source, method, model and schedule.

use crate::data::synthetic::{three_domain_imbalanced_benchmark, two_domain_benchmark, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{HeadKind, ModelConfig};
use crate::strategies::{StrategyConfig, StrategyKind};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Sequential finetuning with no preservation mechanism.
    Baseline,
    Offline,
    Ddc,
    Dic,
    Ss,
    Ewc,
    EwcOnline,
    Si,
    Mas,
    Nr,
}

impl Method {
    pub fn all() -> [Method; 10] {
        [
            Method::Baseline,
            Method::Offline,
            Method::Ddc,
            Method::Dic,
            Method::Ss,
            Method::Ewc,
            Method::EwcOnline,
            Method::Si,
            Method::Mas,
            Method::Nr,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Offline => "offline",
            Method::Ddc => "ddc",
            Method::Dic => "dic",
            Method::Ss => "ss",
            Method::Ewc => "ewc",
            Method::EwcOnline => "ewc-online",
            Method::Si => "si",
            Method::Mas => "mas",
            Method::Nr => "nr",
        }
    }

    /// Sequential (domain-incremental) methods; the rest train on the union.
    pub fn is_sequential(self) -> bool {
        matches!(
            self,
            Method::Baseline | Method::Ewc | Method::EwcOnline | Method::Si | Method::Mas | Method::Nr
        )
    }

    pub fn strategy_kind(self) -> Option<StrategyKind> {
        match self {
            Method::Ewc => Some(StrategyKind::Ewc),
            Method::EwcOnline => Some(StrategyKind::EwcOnline),
            Method::Si => Some(StrategyKind::Si),
            Method::Mas => Some(StrategyKind::Mas),
            Method::Nr => Some(StrategyKind::Nr),
            _ => None,
        }
    }

    pub fn required_head(self) -> HeadKind {
        match self {
            Method::Ddc => HeadKind::Ddc,
            Method::Dic => HeadKind::Dic,
            _ => HeadKind::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Path to a manifest file (JSON header + delimited rows).
    Manifest { path: PathBuf },
    /// Inline synthetic dataset specification.
    Synthetic { spec: SyntheticSpec },
    /// A shipped benchmark: "two-domain" or "three-domain-imbalanced".
    Preset { name: String },
}

impl DatasetSource {
    pub fn preset_spec(name: &str) -> Result<SyntheticSpec> {
        match name {
            "two-domain" => Ok(two_domain_benchmark()),
            "three-domain-imbalanced" => Ok(three_domain_imbalanced_benchmark()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected 'two-domain' or 'three-domain-imbalanced')"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Sensitive attribute defining the domains: "gender" or "race".
    pub attribute: String,
    /// Task ordering; defaults to the manifest's vocabulary order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_order: Option<Vec<String>>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyConfig>,
    pub model: ModelConfig,
    /// Per-task epochs for sequential methods, total epochs for union
    /// methods.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub augment: bool,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        crate::data::Attribute::parse(&self.attribute)?;
        self.model.validate()?;
        if self.model.head != self.method.required_head() {
            return Err(Error::Config(format!(
                "method '{}' requires a {:?} head, model config has {:?}",
                self.method.name(),
                self.method.required_head(),
                self.model.head
            )));
        }
        match (self.method.strategy_kind(), &self.strategy) {
            (Some(kind), Some(s)) => {
                if s.kind != kind {
                    return Err(Error::Config(format!(
                        "method '{}' requires strategy kind {:?}, got {:?}",
                        self.method.name(),
                        kind,
                        s.kind
                    )));
                }
                s.validate()?;
            }
            (Some(_), None) => {
                return Err(Error::Config(format!(
                    "method '{}' needs a strategy config (coefficient etc.)",
                    self.method.name()
                )));
            }
            (None, Some(_)) => {
                return Err(Error::Config(format!(
                    "method '{}' does not take a strategy config",
                    self.method.name()
                )));
            }
            (None, None) => {}
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON form, embedded in emitted tables
    /// for provenance. Covers the scientific content only: artifact
    /// locations (output_dir, save_checkpoints) are zeroed so the same
    /// experiment hashes identically wherever its files land.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        canonical.save_checkpoints = false;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskMode;

    pub(crate) fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Preset { name: "two-domain".into() },
            attribute: "gender".into(),
            task_order: None,
            method: Method::Baseline,
            strategy: None,
            model: ModelConfig {
                input: [8, 8, 1],
                conv_widths: [4, 4, 4, 8],
                dense_widths: [16, 16, 8],
                dropout: 0.0,
                batch_norm: true,
                residual: false,
                head: HeadKind::Single,
                num_classes: 4,
                num_domains: 2,
                task_mode: TaskMode::Multiclass,
            },
            epochs: 2,
            batch_size: 24,
            learning_rate: 1e-4,
            augment: false,
            seeds: vec![0, 1, 2],
            output_dir: None,
            save_checkpoints: false,
        }
    }

    #[test]
    fn valid_config_passes() {
        base_config().validate().unwrap();
    }

    #[test]
    fn cl_method_requires_matching_strategy() {
        let mut cfg = base_config();
        cfg.method = Method::Ewc;
        assert!(cfg.validate().is_err());
        cfg.strategy = Some(StrategyConfig::new(StrategyKind::Si, 1.0));
        assert!(cfg.validate().is_err());
        cfg.strategy = Some(StrategyConfig::new(StrategyKind::Ewc, 5000.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn union_method_rejects_strategy() {
        let mut cfg = base_config();
        cfg.method = Method::Offline;
        cfg.strategy = Some(StrategyConfig::new(StrategyKind::Ewc, 1.0));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn head_must_match_method() {
        let mut cfg = base_config();
        cfg.method = Method::Ddc;
        assert!(cfg.validate().is_err());
        cfg.model.head = HeadKind::Ddc;
        cfg.validate().unwrap();
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = base_config();
        let mut b = base_config();
        assert_eq!(a.config_hash(), b.config_hash());
        b.learning_rate = 2e-4;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = base_config();
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
    }
}
