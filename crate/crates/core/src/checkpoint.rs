//! Versioned checkpoint container: model config, parameters, batch-norm
//! running statistics, and (optionally) optimizer and strategy state so a
//! run can resume mid-stream. JSON with exact f64 round-tripping, so a
//! reloaded model produces bit-identical forward results.

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::strategies::StrategyState;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyState>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Checkpoint { version: CHECKPOINT_VERSION, model, adam: None, strategy: None }
    }

    pub fn with_training_state(
        model: Model,
        adam: AdamState,
        strategy: Option<StrategyState>,
    ) -> Self {
        Checkpoint { version: CHECKPOINT_VERSION, model, adam: Some(adam), strategy }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::File::create(path)?.write_all(json.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut text = String::new();
        std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open checkpoint '{}': {e}", path.display())))?
            .read_to_string(&mut text)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, HeadKind, ModelConfig, TaskMode};
    use crate::rng::rng_from_seed;
    use crate::tensor::Tensor;
    use rand::Rng;

    #[test]
    fn roundtrip_gives_bit_identical_forward() {
        let cfg = ModelConfig {
            input: [8, 8, 1],
            conv_widths: [2, 3, 2, 2],
            dense_widths: [8, 6, 4],
            dropout: 0.2,
            batch_norm: true,
            residual: true,
            head: HeadKind::Single,
            num_classes: 3,
            num_domains: 1,
            task_mode: TaskMode::Multiclass,
        };
        let mut model = build_model(&cfg, 42).unwrap();
        // Drift the BN running stats away from their init so they are
        // covered by the round-trip.
        let mut rng = rng_from_seed(1);
        let batch = Tensor::new(vec![4, 8, 8, 1], (0..256).map(|_| rng.random::<f64>()).collect())
            .unwrap();
        let _ = model.forward(&batch, &crate::model::ForwardOpts::train(5)).unwrap();

        let dir = std::env::temp_dir().join("fairshift_ckpt_test");
        let path = dir.join("model.ckpt.json");
        Checkpoint::new(model.clone()).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap().model;

        let probe = Tensor::new(vec![2, 8, 8, 1], (0..128).map(|_| rng.random::<f64>()).collect())
            .unwrap();
        let a = model.predict(&probe).unwrap();
        let b = loaded.predict(&probe).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let cfg = ModelConfig {
            input: [8, 8, 1],
            conv_widths: [1, 1, 1, 1],
            dense_widths: [2, 2, 2],
            dropout: 0.0,
            batch_norm: false,
            residual: false,
            head: HeadKind::Single,
            num_classes: 2,
            num_domains: 1,
            task_mode: TaskMode::Multiclass,
        };
        let model = build_model(&cfg, 0).unwrap();
        let dir = std::env::temp_dir().join("fairshift_ckpt_version");
        let path = dir.join("bad.ckpt.json");
        let mut ck = Checkpoint::new(model);
        ck.version = 99;
        ck.save(&path).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
