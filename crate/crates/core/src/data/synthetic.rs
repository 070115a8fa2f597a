//! Synthetic biased-dataset generator.
//!
//! Each class gets a fixed random prototype pattern; each domain adds its
//! own pattern of magnitude `domain_shift`, so domains share the label
//! space but differ in input distribution. Per-(domain, class) counts are
//! exact, which makes arbitrary imbalance patterns (dominant groups, rare
//! cells) easy to script. Everything is deterministic under the seed.

use crate::data::manifest::{DatasetManifest, ManifestRow, SampleSource};
use crate::error::{Error, Result};
use crate::model::TaskMode;
use crate::rng::{normal, rng_from_seed, uniform};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub num_domains: usize,
    /// counts[domain][class] training+test samples for that cell.
    pub counts: Vec<Vec<usize>>,
    /// Magnitude of the per-domain additive pattern.
    pub domain_shift: f64,
    /// Magnitude of the per-class prototype pattern.
    pub class_separation: f64,
    /// Gaussian pixel noise sigma.
    pub noise: f64,
    /// [H, W, C].
    pub image_size: [usize; 3],
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("synthetic spec needs at least 2 classes".into()));
        }
        if self.num_domains < 1 {
            return Err(Error::Config("synthetic spec needs at least 1 domain".into()));
        }
        if self.counts.len() != self.num_domains
            || self.counts.iter().any(|row| row.len() != self.num_classes)
        {
            return Err(Error::Config(format!(
                "counts must be {}x{}",
                self.num_domains, self.num_classes
            )));
        }
        if self.counts.iter().any(|row| row.iter().all(|&n| n == 0)) {
            return Err(Error::Config("every domain needs at least one populated class".into()));
        }
        if self.domain_shift < 0.0 || self.noise < 0.0 || self.class_separation < 0.0 {
            return Err(Error::Config("magnitudes must be nonnegative".into()));
        }
        if self.image_size.iter().any(|&d| d == 0) {
            return Err(Error::Config("image size must be positive".into()));
        }
        Ok(())
    }

    pub fn domain_name(d: usize) -> String {
        format!("D{}", d + 1)
    }

    pub fn domain_names(&self) -> Vec<String> {
        (0..self.num_domains).map(Self::domain_name).collect()
    }
}

/// Generate the dataset as an inline-data manifest with an exact 80/20
/// train/test split stratified by (domain, class). Cells smaller than 5
/// get an empty test side and a warning.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let [h, w, c] = spec.image_size;
    let pixels = h * w * c;
    let mut rng = rng_from_seed(spec.seed);

    let class_patterns: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| (0..pixels).map(|_| uniform(&mut rng, -1.0, 1.0) * spec.class_separation).collect())
        .collect();
    let domain_patterns: Vec<Vec<f64>> = (0..spec.num_domains)
        .map(|_| (0..pixels).map(|_| uniform(&mut rng, -1.0, 1.0) * spec.domain_shift).collect())
        .collect();

    let mut rows = Vec::new();
    for d in 0..spec.num_domains {
        for cls in 0..spec.num_classes {
            let n = spec.counts[d][cls];
            if n == 0 {
                continue;
            }
            let n_test = n / 5;
            if n_test == 0 {
                log::warn!(
                    "synthetic cell (domain {}, class {cls}) has {n} samples; test side empty",
                    SyntheticSpec::domain_name(d)
                );
            }
            let n_train = n - n_test;
            for k in 0..n {
                let data: Vec<f64> = (0..pixels)
                    .map(|i| {
                        let v = 0.5
                            + class_patterns[cls][i]
                            + domain_patterns[d][i]
                            + spec.noise * normal(&mut rng);
                        v.clamp(0.0, 1.0)
                    })
                    .collect();
                let input = Tensor::new(vec![h, w, c], data)?;
                rows.push(ManifestRow {
                    id: format!("d{d}_c{cls}_{k}"),
                    source: SampleSource::Inline(input),
                    label: crate::data::LabelData::Class(cls),
                    gender: SyntheticSpec::domain_name(d),
                    race: "NA".to_string(),
                    split: if k < n_train {
                        crate::data::Split::Train
                    } else {
                        crate::data::Split::Test
                    },
                });
            }
        }
    }

    let mut attributes = BTreeMap::new();
    attributes.insert("gender".to_string(), spec.domain_names());
    attributes.insert("race".to_string(), vec!["NA".to_string()]);

    Ok(DatasetManifest {
        mode: TaskMode::Multiclass,
        num_labels: spec.num_classes,
        attributes,
        exclude: BTreeMap::new(),
        image_root: None,
        image_shape: Some(spec.image_size),
        rows,
    })
}

/// The shipped 2-domain forgetting benchmark: 4 classes, a large domain
/// shift so sequential training forgets, mild noise.
pub fn two_domain_benchmark() -> SyntheticSpec {
    SyntheticSpec {
        num_classes: 4,
        num_domains: 2,
        counts: vec![vec![45; 4], vec![45; 4]],
        domain_shift: 0.55,
        class_separation: 0.18,
        noise: 0.12,
        image_size: [8, 8, 1],
        seed: 2024,
    }
}

/// The shipped 3-domain imbalanced benchmark: one dominant domain, two
/// under-represented ones, distinct shifts per domain.
pub fn three_domain_imbalanced_benchmark() -> SyntheticSpec {
    SyntheticSpec {
        num_classes: 4,
        num_domains: 3,
        counts: vec![vec![60; 4], vec![25; 4], vec![15; 4]],
        domain_shift: 0.55,
        class_separation: 0.18,
        noise: 0.12,
        image_size: [8, 8, 1],
        seed: 7,
    }
}
