//! Domain-incremental continual learning as a bias-mitigation strategy for
//! classification under demographic-attribute distribution shift.
//!
//! The crate covers:
//!
//! - a small f64 tensor/autodiff stack with the Adam optimizer,
//! - a conv backbone with single, domain-discriminative (ddc) and
//!   domain-independent (dic) heads,
//! - continual-learning strategies (EWC, online EWC, SI, MAS, naive
//!   rehearsal) and non-CL baselines (finetune, offline, strategic
//!   sampling, ddc/dic training),
//! - accuracy / fairness / forgetting metrics,
//! - dataset manifests, a synthetic biased-dataset generator, and a
//!   config-driven experiment harness.

pub mod adam;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod kernels;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod strategies;
pub mod tape;
pub mod tensor;
pub mod training;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, Method, ResultBundle, TableFormat};
pub use metrics::{accuracy, cf_score, fairness, overall_accuracy, AccuracyMatrix};
pub use model::{build_model, ddc_decode, dic_forward, ForwardOpts, HeadKind, Model, ModelConfig, TaskMode};
pub use params::ParameterSet;
pub use strategies::{StrategyConfig, StrategyKind, StrategyState};
pub use tape::{GradientTape, Gradients};
pub use tensor::Tensor;
pub use training::{run_cl, run_union, TrainConfig, UnionKind};
