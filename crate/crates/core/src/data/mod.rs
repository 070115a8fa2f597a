//! Dataset model: samples, manifests, domain splits and task streams.

pub mod manifest;
pub mod preprocess;
pub mod synthetic;

use crate::error::{Error, Result};
use crate::model::TaskMode;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use manifest::{load_manifest, save_manifest, DatasetManifest, ManifestHeader, ManifestRow, SampleSource};
pub use preprocess::{augment, bilinear_resize, hflip, preprocess_image, PreprocessConfig, RawImage};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Task label: a class index (multiclass) or a bit vector (multilabel).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelData {
    Class(usize),
    MultiHot(Vec<u8>),
}

impl LabelData {
    pub fn mode(&self) -> TaskMode {
        match self {
            LabelData::Class(_) => TaskMode::Multiclass,
            LabelData::MultiHot(_) => TaskMode::Multilabel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// The sensitive attributes carried by every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Race,
}

impl Attribute {
    pub fn parse(name: &str) -> Result<Attribute> {
        match name {
            "gender" => Ok(Attribute::Gender),
            "race" => Ok(Attribute::Race),
            other => Err(Error::Config(format!(
                "unknown attribute '{other}' (expected 'gender' or 'race')"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Race => "race",
        }
    }
}

/// One labelled, attribute-annotated input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// [H, W, C] values in [0, 1].
    pub input: Tensor,
    pub label: LabelData,
    pub gender: String,
    pub race: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub split: Split,
}

impl Sample {
    pub fn attribute_value(&self, attr: Attribute) -> &str {
        match attr {
            Attribute::Gender => &self.gender,
            Attribute::Race => &self.race,
        }
    }
}

/// One domain of a domain-incremental run: the train and held-out test
/// samples of a single attribute value.
#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Ordered sequence of domain-labelled dataset splits.
#[derive(Debug, Clone)]
pub struct TaskStream {
    pub attribute: Attribute,
    pub tasks: Vec<Task>,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// All training samples across tasks (the offline union).
    pub fn union_train(&self) -> Vec<Sample> {
        self.tasks.iter().flat_map(|t| t.train.iter().cloned()).collect()
    }

    /// Per-domain training counts keyed by task name.
    pub fn train_counts(&self) -> BTreeMap<String, usize> {
        self.tasks.iter().map(|t| (t.name.clone(), t.train.len())).collect()
    }

    /// Task index by name.
    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }
}

/// Partition samples into one task per attribute value, in the given order.
/// `order` must be a permutation of the values present in the vocabulary;
/// every sample lands in exactly one task.
pub fn split_stream(
    samples: &[Sample],
    vocabulary: &[String],
    attribute: Attribute,
    order: &[String],
) -> Result<TaskStream> {
    if order.len() != vocabulary.len() {
        return Err(Error::Config(format!(
            "task order {:?} is not a permutation of the vocabulary {:?}",
            order, vocabulary
        )));
    }
    for v in vocabulary {
        if !order.contains(v) {
            return Err(Error::Config(format!(
                "task order {:?} is missing vocabulary value '{v}'",
                order
            )));
        }
    }
    let mut tasks: Vec<Task> = order
        .iter()
        .map(|name| Task { name: name.clone(), train: Vec::new(), test: Vec::new() })
        .collect();
    for s in samples {
        let value = s.attribute_value(attribute);
        let Some(task) = tasks.iter_mut().find(|t| t.name == value) else {
            return Err(Error::Input(format!(
                "sample '{}' has {} value '{}' outside the vocabulary {:?}",
                s.id,
                attribute.name(),
                value,
                vocabulary
            )));
        };
        match s.split {
            Split::Train => task.train.push(s.clone()),
            Split::Test => task.test.push(s.clone()),
        }
    }
    Ok(TaskStream { attribute, tasks })
}

/// Stack sample inputs into a [B, H, W, C] batch tensor.
pub fn batch_inputs(samples: &[&Sample]) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let shape = samples[0].input.shape().to_vec();
    let mut data = Vec::with_capacity(samples.len() * samples[0].input.len());
    for s in samples {
        if s.input.shape() != shape.as_slice() {
            return Err(Error::Input(format!(
                "sample '{}' shape {:?} differs from batch shape {:?}",
                s.id,
                s.input.shape(),
                shape
            )));
        }
        data.extend_from_slice(s.input.data());
    }
    let mut batch_shape = vec![samples.len()];
    batch_shape.extend_from_slice(&shape);
    Tensor::new(batch_shape, data)
}

/// Stack labels into a target tensor: one-hot rows [B, M] in multiclass
/// mode, 0/1 rows [B, L] in multilabel mode.
pub fn batch_labels(samples: &[&Sample], num_classes: usize) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    match &samples[0].label {
        LabelData::Class(_) => {
            let mut data = vec![0.0; samples.len() * num_classes];
            for (i, s) in samples.iter().enumerate() {
                let LabelData::Class(c) = &s.label else {
                    return Err(Error::Input(format!("sample '{}' mixes label modes", s.id)));
                };
                if *c >= num_classes {
                    return Err(Error::Input(format!(
                        "sample '{}' class {c} out of range 0..{num_classes}",
                        s.id
                    )));
                }
                data[i * num_classes + c] = 1.0;
            }
            Tensor::new(vec![samples.len(), num_classes], data)
        }
        LabelData::MultiHot(first) => {
            let width = first.len();
            let mut data = Vec::with_capacity(samples.len() * width);
            for s in samples {
                let LabelData::MultiHot(bits) = &s.label else {
                    return Err(Error::Input(format!("sample '{}' mixes label modes", s.id)));
                };
                if bits.len() != width {
                    return Err(Error::Input(format!(
                        "sample '{}' has {} label bits, expected {width}",
                        s.id,
                        bits.len()
                    )));
                }
                data.extend(bits.iter().map(|&b| f64::from(b)));
            }
            Tensor::new(vec![samples.len(), width], data)
        }
    }
}
