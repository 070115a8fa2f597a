//! Model zoo: a conv backbone at configurable scale with one of three head
//! variants.
//!
//! The backbone is four convolutional blocks (two 3x3 convs, 2x2 max-pool,
//! batch-norm, dropout, optional identity skip across the second conv)
//! feeding three ReLU dense layers. Heads:
//!
//! - `Single`: one classification layer of width M.
//! - `Ddc`: one joint layer of width N*M, one unit per (domain, class) pair;
//!   class probabilities are recovered by [`ddc_decode`].
//! - `Dic`: N separate heads of width M sharing the backbone; training
//!   routes each sample through its own domain's head, inference sums the
//!   head logits.

use crate::error::{Error, Result};
use crate::loss::{sigmoid, softmax_rows};
use crate::params::ParameterSet;
use crate::rng::{normal, rng_from_seed, SeededRng};
use crate::tape::{BufId, GradientTape};
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Single,
    Ddc,
    Dic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Multiclass,
    Multilabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input image shape [H, W, C].
    pub input: [usize; 3],
    /// Output channels of the four conv blocks.
    pub conv_widths: [usize; 4],
    /// Widths of the three dense layers.
    pub dense_widths: [usize; 3],
    /// Dropout rate applied per conv block at training time.
    pub dropout: f64,
    pub batch_norm: bool,
    /// Identity skip across the second conv of each block; off by default.
    #[serde(default)]
    pub residual: bool,
    pub head: HeadKind,
    /// Number of classes M.
    pub num_classes: usize,
    /// Number of domains N (used by ddc/dic heads).
    pub num_domains: usize,
    pub task_mode: TaskMode,
}

impl ModelConfig {
    /// Desk-scale default: the full-scale architecture shrunk ~8x so CPU
    /// runs finish in minutes.
    pub fn desk_scale(
        input: [usize; 3],
        num_classes: usize,
        num_domains: usize,
        head: HeadKind,
        task_mode: TaskMode,
    ) -> Self {
        ModelConfig {
            input,
            conv_widths: [8, 16, 16, 32],
            dense_widths: [64, 32, 16],
            dropout: 0.25,
            batch_norm: true,
            residual: false,
            head,
            num_classes,
            num_domains,
            task_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("input shape {:?} has zero dims", self.input)));
        }
        if self.conv_widths.iter().any(|&w| w == 0) || self.dense_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if self.num_domains < 1 {
            return Err(Error::Config("need at least 1 domain".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the raw output layer(s).
    pub fn output_width(&self) -> usize {
        match self.head {
            HeadKind::Single => self.num_classes,
            HeadKind::Ddc => self.num_domains * self.num_classes,
            HeadKind::Dic => self.num_classes,
        }
    }

    /// Flattened feature width after the conv stack.
    fn feature_width(&self) -> usize {
        let mut h = self.input[0];
        let mut w = self.input[1];
        for _ in 0..4 {
            h = crate::kernels::pooled_dim(h);
            w = crate::kernels::pooled_dim(w);
        }
        h * w * self.conv_widths[3]
    }
}

/// Per-block batch-norm running statistics (evaluation-time statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnStat {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Forward-pass options: mode, the dropout stream for this step, and
/// domain routing for dic training.
#[derive(Debug, Clone, Default)]
pub struct ForwardOpts {
    pub training: bool,
    pub dropout_seed: u64,
    pub domain_ids: Option<Vec<usize>>,
}

impl ForwardOpts {
    pub fn eval() -> Self {
        ForwardOpts::default()
    }

    pub fn train(dropout_seed: u64) -> Self {
        ForwardOpts { training: true, dropout_seed, domain_ids: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    config: ModelConfig,
    params: ParameterSet,
    bn_running: Vec<BnStat>,
}

/// Deterministically initialize a model from a seed; the same config and
/// seed give bit-identical parameters.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<Model> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut params = ParameterSet::new();
    let mut bn_running = Vec::new();

    let mut cin = cfg.input[2];
    for (i, &cout) in cfg.conv_widths.iter().enumerate() {
        params.insert(format!("block{i}.conv0.w"), he_init(&mut rng, vec![3, 3, cin, cout], 9 * cin))?;
        params.insert(format!("block{i}.conv0.b"), Tensor::zeros(vec![cout]))?;
        params.insert(format!("block{i}.conv1.w"), he_init(&mut rng, vec![3, 3, cout, cout], 9 * cout))?;
        params.insert(format!("block{i}.conv1.b"), Tensor::zeros(vec![cout]))?;
        if cfg.batch_norm {
            params.insert(format!("block{i}.bn.gamma"), Tensor::filled(vec![cout], 1.0))?;
            params.insert(format!("block{i}.bn.beta"), Tensor::zeros(vec![cout]))?;
            bn_running.push(BnStat { mean: vec![0.0; cout], var: vec![1.0; cout] });
        }
        cin = cout;
    }

    let mut din = cfg.feature_width();
    for (i, &dout) in cfg.dense_widths.iter().enumerate() {
        params.insert(format!("dense{i}.w"), he_init(&mut rng, vec![din, dout], din))?;
        params.insert(format!("dense{i}.b"), Tensor::zeros(vec![dout]))?;
        din = dout;
    }

    match cfg.head {
        HeadKind::Single | HeadKind::Ddc => {
            let width = cfg.output_width();
            params.insert("head.w", he_init(&mut rng, vec![din, width], din))?;
            params.insert("head.b", Tensor::zeros(vec![width]))?;
        }
        HeadKind::Dic => {
            for h in 0..cfg.num_domains {
                params.insert(format!("head{h}.w"), he_init(&mut rng, vec![din, cfg.num_classes], din))?;
                params.insert(format!("head{h}.b"), Tensor::zeros(vec![cfg.num_classes]))?;
            }
        }
    }

    Ok(Model { config: cfg.clone(), params, bn_running })
}

fn he_init(rng: &mut SeededRng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let scale = (2.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| normal(rng) * scale).collect();
    Tensor::new(shape, data).expect("init shape")
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn bn_running(&self) -> &[BnStat] {
        &self.bn_running
    }

    /// Parameter names belonging to the head layer(s).
    pub fn head_param_names(&self) -> Vec<String> {
        self.params.names().filter(|n| n.starts_with("head")).map(str::to_string).collect()
    }

    /// Forward pass recording a tape. Training mode applies dropout, uses
    /// batch statistics for batch-norm and updates the running statistics;
    /// evaluation mode is deterministic and leaves the model untouched.
    pub fn forward(&mut self, batch: &Tensor, opts: &ForwardOpts) -> Result<(Tensor, GradientTape)> {
        let (logits, tape, updates) = run_forward(
            &self.config,
            &self.params,
            &self.bn_running,
            batch,
            opts,
        )?;
        if opts.training {
            for (slot, mean, var) in updates {
                let stat = &mut self.bn_running[slot];
                for (r, b) in stat.mean.iter_mut().zip(&mean) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
                }
                for (r, b) in stat.var.iter_mut().zip(&var) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
                }
            }
        }
        Ok((logits, tape))
    }

    /// Evaluation-mode forward that still records a tape (used for
    /// per-sample importance estimation). Running statistics are read, not
    /// written.
    pub fn forward_traced(&self, batch: &Tensor) -> Result<(Tensor, GradientTape)> {
        let (logits, tape, _) = run_forward(
            &self.config,
            &self.params,
            &self.bn_running,
            batch,
            &ForwardOpts::eval(),
        )?;
        Ok((logits, tape))
    }

    /// Evaluation logits (raw head output; dic heads summed).
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward_traced(batch)?.0)
    }

    /// Per-class decision scores [B, M] for evaluation. Multiclass: raw
    /// logits for single/dic heads (argmax-equivalent), marginalized
    /// probabilities for ddc. Multilabel: sigmoid probabilities for
    /// single/dic, the per-class max over domain copies for ddc.
    pub fn decision_scores(&self, batch: &Tensor) -> Result<Tensor> {
        let logits = self.predict(batch)?;
        match (self.config.head, self.config.task_mode) {
            (HeadKind::Single | HeadKind::Dic, TaskMode::Multiclass) => Ok(logits),
            (HeadKind::Single | HeadKind::Dic, TaskMode::Multilabel) => {
                Ok(logits.map(sigmoid))
            }
            (HeadKind::Ddc, TaskMode::Multiclass) => {
                ddc_decode(&logits, self.config.num_domains, self.config.num_classes)
            }
            (HeadKind::Ddc, TaskMode::Multilabel) => {
                ddc_decode_multilabel(&logits, self.config.num_domains, self.config.num_classes)
            }
        }
    }
}

/// Shared forward implementation. Returns the logits, the tape, and the
/// batch-norm statistics observed at each block (training mode only).
#[allow(clippy::type_complexity)]
fn run_forward(
    cfg: &ModelConfig,
    params: &ParameterSet,
    bn_running: &[BnStat],
    batch: &Tensor,
    opts: &ForwardOpts,
) -> Result<(Tensor, GradientTape, Vec<(usize, Vec<f64>, Vec<f64>)>)> {
    if batch.shape().len() != 4
        || batch.shape()[1] != cfg.input[0]
        || batch.shape()[2] != cfg.input[1]
        || batch.shape()[3] != cfg.input[2]
    {
        return Err(Error::Config(format!(
            "layer 'input' expects [B, {}, {}, {}], got {:?}",
            cfg.input[0],
            cfg.input[1],
            cfg.input[2],
            batch.shape()
        )));
    }
    let b = batch.shape()[0];
    let mut tape = GradientTape::new();
    let mut dropout_rng = rng_from_seed(opts.dropout_seed);
    let mut bn_updates = Vec::new();

    let mut x = tape.register_input(batch);
    let mut bn_slot = 0usize;
    for i in 0..4 {
        let w0 = register(&mut tape, params, &format!("block{i}.conv0.w"));
        let b0 = register(&mut tape, params, &format!("block{i}.conv0.b"));
        let w1 = register(&mut tape, params, &format!("block{i}.conv1.w"));
        let b1 = register(&mut tape, params, &format!("block{i}.conv1.b"));

        let a = tape.conv2d(x, w0, b0);
        let a = tape.relu(a);
        let mut z = tape.conv2d(a, w1, b1);
        if cfg.residual {
            z = tape.add(z, a);
        }
        let h = tape.relu(z);
        let mut p = tape.maxpool2(h);

        if cfg.batch_norm {
            let gamma = register(&mut tape, params, &format!("block{i}.bn.gamma"));
            let beta = register(&mut tape, params, &format!("block{i}.bn.beta"));
            let stat = &bn_running[bn_slot];
            let (out, mean, var) = if opts.training {
                let (out, mean, var) = tape.batchnorm(p, gamma, beta, BN_EPS, None);
                (out, mean, var)
            } else {
                let (out, mean, var) =
                    tape.batchnorm(p, gamma, beta, BN_EPS, Some((&stat.mean, &stat.var)));
                (out, mean, var)
            };
            if opts.training {
                bn_updates.push((bn_slot, mean, var));
            }
            p = out;
            bn_slot += 1;
        }
        if opts.training && cfg.dropout > 0.0 {
            let n = tape.value(p).len();
            let keep = 1.0 - cfg.dropout;
            let mask: Vec<f64> = (0..n)
                .map(|_| if dropout_rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            p = tape.mask_mul(p, mask);
        }
        x = p;
    }

    let feat = cfg.feature_width();
    let mut f = tape.reshape(x, vec![b, feat]);
    for i in 0..3 {
        let w = register(&mut tape, params, &format!("dense{i}.w"));
        let bias = register(&mut tape, params, &format!("dense{i}.b"));
        let h = tape.matmul(f, w);
        let h = tape.add_row_bias(h, bias);
        f = tape.relu(h);
    }

    let logits = match cfg.head {
        HeadKind::Single | HeadKind::Ddc => {
            let w = register(&mut tape, params, "head.w");
            let bias = register(&mut tape, params, "head.b");
            let h = tape.matmul(f, w);
            tape.add_row_bias(h, bias)
        }
        HeadKind::Dic => dic_head(&mut tape, params, cfg, f, b, opts)?,
    };
    tape.set_output(logits);
    let out = tape.tensor(logits);
    out.check_finite("logits")?;
    Ok((out, tape, bn_updates))
}

fn register(tape: &mut GradientTape, params: &ParameterSet, name: &str) -> BufId {
    tape.register_param(name, params.get(name).expect("parameter exists by construction"))
}

/// Dic head: training routes each sample through its domain's head so the
/// loss (and gradient) sees only that head; inference sums all head logits.
fn dic_head(
    tape: &mut GradientTape,
    params: &ParameterSet,
    cfg: &ModelConfig,
    features: BufId,
    batch: usize,
    opts: &ForwardOpts,
) -> Result<BufId> {
    match (&opts.domain_ids, opts.training) {
        (Some(ids), _) => {
            if ids.len() != batch {
                return Err(Error::Input(format!(
                    "{} domain ids for batch of {batch}",
                    ids.len()
                )));
            }
            if let Some(&bad) = ids.iter().find(|&&d| d >= cfg.num_domains) {
                return Err(Error::Input(format!(
                    "domain id {bad} out of range 0..{}",
                    cfg.num_domains
                )));
            }
            let mut merged: Option<BufId> = None;
            for h in 0..cfg.num_domains {
                // Register every head so unselected heads report zero
                // gradients rather than missing entries.
                let w = register(tape, params, &format!("head{h}.w"));
                let bias = register(tape, params, &format!("head{h}.b"));
                let rows: Vec<usize> =
                    (0..batch).filter(|&s| ids[s] == h).collect();
                if rows.is_empty() {
                    continue;
                }
                let sub = tape.rows_gather(features, rows.clone());
                let out = tape.matmul(sub, w);
                let out = tape.add_row_bias(out, bias);
                let placed = tape.rows_scatter(out, rows, batch);
                merged = Some(match merged {
                    None => placed,
                    Some(acc) => tape.add(acc, placed),
                });
            }
            merged.ok_or_else(|| Error::Input("empty batch for dic head".into()))
        }
        (None, true) => Err(Error::Input(
            "dic training requires domain ids for every sample".into(),
        )),
        (None, false) => {
            // Inference: sum of all head logits.
            let mut merged: Option<BufId> = None;
            for h in 0..cfg.num_domains {
                let w = register(tape, params, &format!("head{h}.w"));
                let bias = register(tape, params, &format!("head{h}.b"));
                let out = tape.matmul(features, w);
                let out = tape.add_row_bias(out, bias);
                merged = Some(match merged {
                    None => out,
                    Some(acc) => tape.add(acc, out),
                });
            }
            Ok(merged.expect("at least one domain"))
        }
    }
}

/// Collapse ddc joint logits [B, N*M] to class probabilities [B, M]:
/// softmax over all N*M units, then sum the N domain copies of each class.
/// Joint unit layout is `domain * M + class`.
pub fn ddc_decode(logits: &Tensor, num_domains: usize, num_classes: usize) -> Result<Tensor> {
    let width = num_domains * num_classes;
    if logits.shape().len() != 2 || logits.shape()[1] != width {
        return Err(Error::Input(format!(
            "ddc decode expects width {width} (N={num_domains} x M={num_classes}), got {:?}",
            logits.shape()
        )));
    }
    let b = logits.shape()[0];
    let probs = softmax_rows(logits);
    let mut out = vec![0.0; b * num_classes];
    for s in 0..b {
        for d in 0..num_domains {
            for c in 0..num_classes {
                out[s * num_classes + c] += probs.row(s)[d * num_classes + c];
            }
        }
    }
    Tensor::new(vec![b, num_classes], out)
}

/// Multilabel analog of [`ddc_decode`]: per class, the maximum over domain
/// copies of the sigmoid probability.
pub fn ddc_decode_multilabel(
    logits: &Tensor,
    num_domains: usize,
    num_classes: usize,
) -> Result<Tensor> {
    let width = num_domains * num_classes;
    if logits.shape().len() != 2 || logits.shape()[1] != width {
        return Err(Error::Input(format!(
            "ddc decode expects width {width}, got {:?}",
            logits.shape()
        )));
    }
    let b = logits.shape()[0];
    let mut out = vec![0.0; b * num_classes];
    for s in 0..b {
        for c in 0..num_classes {
            let mut best = f64::NEG_INFINITY;
            for d in 0..num_domains {
                best = best.max(sigmoid(logits.row(s)[d * num_classes + c]));
            }
            out[s * num_classes + c] = best;
        }
    }
    Tensor::new(vec![b, num_classes], out)
}

/// Convenience wrapper matching the dic contract: training mode routes by
/// domain, inference sums heads.
pub fn dic_forward(
    model: &mut Model,
    batch: &Tensor,
    domain_ids: Option<&[usize]>,
    training: bool,
    dropout_seed: u64,
) -> Result<(Tensor, GradientTape)> {
    if model.config().head != HeadKind::Dic {
        return Err(Error::Usage("dic_forward on a non-dic model".into()));
    }
    let opts = ForwardOpts {
        training,
        dropout_seed,
        domain_ids: domain_ids.map(<[usize]>::to_vec),
    };
    model.forward(batch, &opts)
}
