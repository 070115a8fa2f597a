//! Reverse-mode differentiation over a recorded op graph.
//!
//! The model's forward pass records every operation and intermediate buffer
//! on a [`GradientTape`]; [`GradientTape::backward`] replays the ops in
//! reverse and returns one gradient per registered parameter. The tape is
//! consumed by value, so it cannot be replayed twice.

use crate::error::{Error, Result};
use crate::kernels;
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// Arena index for tape buffers.
pub type BufId = usize;

#[derive(Debug)]
struct TapeBuf {
    data: Vec<f64>,
    shape: Vec<usize>,
}

#[derive(Debug)]
enum TapeOp {
    /// out[m,n] = a[m,k] * b[k,n]
    Matmul { a: BufId, b: BufId, out: BufId, m: usize, k: usize, n: usize },
    /// out[r, c] = input[r, c] + bias[c]
    AddRowBias { input: BufId, bias: BufId, out: BufId, rows: usize, cols: usize },
    /// out = a + b (same shape)
    Add { a: BufId, b: BufId, out: BufId },
    Relu { input: BufId, out: BufId },
    /// Elementwise multiply by a constant mask (dropout); no gradient to the mask.
    MaskMul { input: BufId, out: BufId, mask: Vec<f64> },
    Conv2d {
        input: BufId,
        weight: BufId,
        bias: BufId,
        out: BufId,
        b: usize,
        h: usize,
        w: usize,
        cin: usize,
        cout: usize,
    },
    MaxPool2 { input: BufId, out: BufId, argmax: Vec<usize> },
    BatchNorm {
        input: BufId,
        gamma: BufId,
        beta: BufId,
        out: BufId,
        positions: usize,
        c: usize,
        eps: f64,
        saved: kernels::BatchNormSaved,
        through_stats: bool,
    },
    /// out[r] = input[rows[r]] for row vectors of width `cols`.
    RowsGather { input: BufId, out: BufId, rows: Vec<usize>, cols: usize },
    /// out[rows[r]] = input[r]; other output rows stay zero.
    RowsScatter { input: BufId, out: BufId, rows: Vec<usize>, cols: usize },
    /// Shape change only; gradients pass through unchanged.
    Reshape { input: BufId, out: BufId },
}

/// Gradients keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(BTreeMap<String, Tensor>);

impl Gradients {
    pub fn new() -> Self {
        Gradients(BTreeMap::new())
    }

    pub fn insert(&mut self, name: impl Into<String>, grad: Tensor) {
        self.0.insert(name.into(), grad);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.0.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Accumulate `factor * values` into the named gradient.
    pub fn add_scaled(&mut self, name: &str, values: &[f64], factor: f64) {
        if let Some(g) = self.0.get_mut(name) {
            for (gv, &v) in g.data_mut().iter_mut().zip(values) {
                *gv += factor * v;
            }
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, g) in &self.0 {
            g.check_finite(&format!("gradient '{name}'"))?;
        }
        Ok(())
    }
}

impl Default for Gradients {
    fn default() -> Self {
        Self::new()
    }
}

/// Recorded op graph for one forward pass.
#[derive(Debug)]
pub struct GradientTape {
    bufs: Vec<TapeBuf>,
    ops: Vec<TapeOp>,
    params: Vec<(String, BufId)>,
    output: Option<BufId>,
}

impl GradientTape {
    pub fn new() -> Self {
        GradientTape { bufs: Vec::new(), ops: Vec::new(), params: Vec::new(), output: None }
    }

    pub fn alloc(&mut self, data: Vec<f64>, shape: Vec<usize>) -> BufId {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        let id = self.bufs.len();
        self.bufs.push(TapeBuf { data, shape });
        id
    }

    /// Snapshot a parameter tensor onto the tape under its slot name.
    pub fn register_param(&mut self, name: &str, value: &Tensor) -> BufId {
        let id = self.alloc(value.data().to_vec(), value.shape().to_vec());
        self.params.push((name.to_string(), id));
        id
    }

    pub fn register_input(&mut self, value: &Tensor) -> BufId {
        self.alloc(value.data().to_vec(), value.shape().to_vec())
    }

    pub fn value(&self, id: BufId) -> &[f64] {
        &self.bufs[id].data
    }

    pub fn shape(&self, id: BufId) -> &[usize] {
        &self.bufs[id].shape
    }

    pub fn tensor(&self, id: BufId) -> Tensor {
        Tensor::new(self.bufs[id].shape.clone(), self.bufs[id].data.clone())
            .expect("tape buffer shape consistent")
    }

    /// Mark the forward output (logits) buffer.
    pub fn set_output(&mut self, id: BufId) {
        self.output = Some(id);
    }

    pub fn output(&self) -> Option<BufId> {
        self.output
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    // ── Recording ops (compute forward + push the record) ─────────────

    pub fn matmul(&mut self, a: BufId, b: BufId) -> BufId {
        let (m, k) = (self.bufs[a].shape[0], self.bufs[a].shape[1]);
        let n = self.bufs[b].shape[1];
        debug_assert_eq!(self.bufs[b].shape[0], k);
        let mut out = vec![0.0; m * n];
        kernels::matmul(&self.bufs[a].data, &self.bufs[b].data, m, k, n, &mut out);
        let out_id = self.alloc(out, vec![m, n]);
        self.ops.push(TapeOp::Matmul { a, b, out: out_id, m, k, n });
        out_id
    }

    pub fn add_row_bias(&mut self, input: BufId, bias: BufId) -> BufId {
        let (rows, cols) = (self.bufs[input].shape[0], self.bufs[input].shape[1]);
        debug_assert_eq!(self.bufs[bias].data.len(), cols);
        let mut out = self.bufs[input].data.clone();
        for r in 0..rows {
            for c in 0..cols {
                out[r * cols + c] += self.bufs[bias].data[c];
            }
        }
        let out_id = self.alloc(out, vec![rows, cols]);
        self.ops.push(TapeOp::AddRowBias { input, bias, out: out_id, rows, cols });
        out_id
    }

    pub fn add(&mut self, a: BufId, b: BufId) -> BufId {
        debug_assert_eq!(self.bufs[a].shape, self.bufs[b].shape);
        let out: Vec<f64> =
            self.bufs[a].data.iter().zip(&self.bufs[b].data).map(|(x, y)| x + y).collect();
        let shape = self.bufs[a].shape.clone();
        let out_id = self.alloc(out, shape);
        self.ops.push(TapeOp::Add { a, b, out: out_id });
        out_id
    }

    pub fn relu(&mut self, input: BufId) -> BufId {
        let out: Vec<f64> = self.bufs[input].data.iter().map(|&v| v.max(0.0)).collect();
        let shape = self.bufs[input].shape.clone();
        let out_id = self.alloc(out, shape);
        self.ops.push(TapeOp::Relu { input, out: out_id });
        out_id
    }

    /// Multiply by a fixed mask; used for dropout where the mask already
    /// carries the 1/(1-p) inverted scaling.
    pub fn mask_mul(&mut self, input: BufId, mask: Vec<f64>) -> BufId {
        debug_assert_eq!(mask.len(), self.bufs[input].data.len());
        let out: Vec<f64> =
            self.bufs[input].data.iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.bufs[input].shape.clone();
        let out_id = self.alloc(out, shape);
        self.ops.push(TapeOp::MaskMul { input, out: out_id, mask });
        out_id
    }

    pub fn conv2d(&mut self, input: BufId, weight: BufId, bias: BufId) -> BufId {
        let (b, h, w, cin) = {
            let s = &self.bufs[input].shape;
            (s[0], s[1], s[2], s[3])
        };
        let cout = self.bufs[weight].shape[3];
        let mut out = vec![0.0; b * h * w * cout];
        kernels::conv2d(
            &self.bufs[input].data,
            &self.bufs[weight].data,
            &self.bufs[bias].data,
            b,
            h,
            w,
            cin,
            cout,
            &mut out,
        );
        let out_id = self.alloc(out, vec![b, h, w, cout]);
        self.ops.push(TapeOp::Conv2d { input, weight, bias, out: out_id, b, h, w, cin, cout });
        out_id
    }

    pub fn maxpool2(&mut self, input: BufId) -> BufId {
        let (b, h, w, c) = {
            let s = &self.bufs[input].shape;
            (s[0], s[1], s[2], s[3])
        };
        let (oh, ow) = (kernels::pooled_dim(h), kernels::pooled_dim(w));
        let mut out = vec![0.0; b * oh * ow * c];
        let mut argmax = vec![0usize; out.len()];
        kernels::maxpool2(&self.bufs[input].data, b, h, w, c, &mut out, &mut argmax);
        let out_id = self.alloc(out, vec![b, oh, ow, c]);
        self.ops.push(TapeOp::MaxPool2 { input, out: out_id, argmax });
        out_id
    }

    /// Batch-norm over NHWC channels. `stats` carries running statistics for
    /// evaluation mode; `None` computes batch statistics (training mode) and
    /// differentiates through them. Returns (out, batch_mean, batch_var).
    pub fn batchnorm(
        &mut self,
        input: BufId,
        gamma: BufId,
        beta: BufId,
        eps: f64,
        stats: Option<(&[f64], &[f64])>,
    ) -> (BufId, Vec<f64>, Vec<f64>) {
        let shape = self.bufs[input].shape.clone();
        let c = *shape.last().expect("batchnorm input has channels");
        let positions = self.bufs[input].data.len() / c;
        let through_stats = stats.is_none();
        let mut out = vec![0.0; self.bufs[input].data.len()];
        let saved = kernels::batchnorm(
            &self.bufs[input].data,
            &self.bufs[gamma].data,
            &self.bufs[beta].data,
            positions,
            c,
            eps,
            stats,
            &mut out,
        );
        let mean = saved.mean.clone();
        let var = saved.var.clone();
        let out_id = self.alloc(out, shape);
        self.ops.push(TapeOp::BatchNorm {
            input,
            gamma,
            beta,
            out: out_id,
            positions,
            c,
            eps,
            saved,
            through_stats,
        });
        (out_id, mean, var)
    }

    pub fn rows_gather(&mut self, input: BufId, rows: Vec<usize>) -> BufId {
        let cols = self.bufs[input].shape[1];
        let mut out = vec![0.0; rows.len() * cols];
        for (r, &src) in rows.iter().enumerate() {
            out[r * cols..(r + 1) * cols]
                .copy_from_slice(&self.bufs[input].data[src * cols..(src + 1) * cols]);
        }
        let out_id = self.alloc(out, vec![rows.len(), cols]);
        self.ops.push(TapeOp::RowsGather { input, out: out_id, rows, cols });
        out_id
    }

    /// Scatter the rows of `input` into a fresh [out_rows, cols] buffer at
    /// the given positions; untouched rows are zero.
    pub fn rows_scatter(&mut self, input: BufId, rows: Vec<usize>, out_rows: usize) -> BufId {
        let cols = self.bufs[input].shape[1];
        let mut out = vec![0.0; out_rows * cols];
        for (r, &dst) in rows.iter().enumerate() {
            out[dst * cols..(dst + 1) * cols]
                .copy_from_slice(&self.bufs[input].data[r * cols..(r + 1) * cols]);
        }
        let out_id = self.alloc(out, vec![out_rows, cols]);
        self.ops.push(TapeOp::RowsScatter { input, out: out_id, rows, cols });
        out_id
    }

    pub fn reshape(&mut self, input: BufId, shape: Vec<usize>) -> BufId {
        debug_assert_eq!(shape.iter().product::<usize>(), self.bufs[input].data.len());
        let data = self.bufs[input].data.clone();
        let out_id = self.alloc(data, shape);
        self.ops.push(TapeOp::Reshape { input, out: out_id });
        out_id
    }

    // ── Backward ───────────────────────────────────────────────────────

    /// Replay the tape in reverse from the output buffer seeded with
    /// `loss_grad`. Consumes the tape; one gradient per registered
    /// parameter is returned (zeros where no gradient flowed).
    pub fn backward(self, loss_grad: &Tensor) -> Result<Gradients> {
        let output = self
            .output
            .ok_or_else(|| Error::Usage("tape has no output buffer; forward incomplete".into()))?;
        if loss_grad.shape() != self.bufs[output].shape {
            return Err(Error::Input(format!(
                "loss gradient shape {:?} does not match output shape {:?}",
                loss_grad.shape(),
                self.bufs[output].shape
            )));
        }
        let mut grad: Vec<Option<Vec<f64>>> = vec![None; self.bufs.len()];
        grad[output] = Some(loss_grad.data().to_vec());

        for op in self.ops.iter().rev() {
            match op {
                TapeOp::Matmul { a, b, out, m, k, n } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_a = take_grad(&mut grad, *a, m * k);
                    let mut d_b = take_grad(&mut grad, *b, k * n);
                    kernels::matmul_backward(
                        &self.bufs[*a].data,
                        &self.bufs[*b].data,
                        &d_out,
                        *m,
                        *k,
                        *n,
                        &mut d_a,
                        &mut d_b,
                    );
                    grad[*a] = Some(d_a);
                    grad[*b] = Some(d_b);
                }
                TapeOp::AddRowBias { input, bias, out, rows, cols } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, rows * cols);
                    let mut d_b = take_grad(&mut grad, *bias, *cols);
                    for r in 0..*rows {
                        for c in 0..*cols {
                            d_in[r * cols + c] += d_out[r * cols + c];
                            d_b[c] += d_out[r * cols + c];
                        }
                    }
                    grad[*input] = Some(d_in);
                    grad[*bias] = Some(d_b);
                }
                TapeOp::Add { a, b, out } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    for id in [a, b] {
                        let mut d = take_grad(&mut grad, *id, d_out.len());
                        for (g, &dv) in d.iter_mut().zip(&d_out) {
                            *g += dv;
                        }
                        grad[*id] = Some(d);
                    }
                }
                TapeOp::Relu { input, out } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, d_out.len());
                    for (i, (g, &dv)) in d_in.iter_mut().zip(&d_out).enumerate() {
                        if self.bufs[*input].data[i] > 0.0 {
                            *g += dv;
                        }
                    }
                    grad[*input] = Some(d_in);
                }
                TapeOp::MaskMul { input, out, mask } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, d_out.len());
                    for ((g, &dv), &m) in d_in.iter_mut().zip(&d_out).zip(mask) {
                        *g += dv * m;
                    }
                    grad[*input] = Some(d_in);
                }
                TapeOp::Conv2d { input, weight, bias, out, b, h, w, cin, cout } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, b * h * w * cin);
                    let mut d_w = take_grad(&mut grad, *weight, 9 * cin * cout);
                    let mut d_b = take_grad(&mut grad, *bias, *cout);
                    kernels::conv2d_backward(
                        &self.bufs[*input].data,
                        &self.bufs[*weight].data,
                        &d_out,
                        *b,
                        *h,
                        *w,
                        *cin,
                        *cout,
                        &mut d_in,
                        &mut d_w,
                        &mut d_b,
                    );
                    grad[*input] = Some(d_in);
                    grad[*weight] = Some(d_w);
                    grad[*bias] = Some(d_b);
                }
                TapeOp::MaxPool2 { input, out, argmax } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let n_in = self.bufs[*input].data.len();
                    let mut d_in = take_grad(&mut grad, *input, n_in);
                    for (o, &src) in argmax.iter().enumerate() {
                        d_in[src] += d_out[o];
                    }
                    grad[*input] = Some(d_in);
                }
                TapeOp::BatchNorm {
                    input,
                    gamma,
                    beta,
                    out,
                    positions,
                    c,
                    eps,
                    saved,
                    through_stats,
                } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, positions * c);
                    let mut d_g = take_grad(&mut grad, *gamma, *c);
                    let mut d_b = take_grad(&mut grad, *beta, *c);
                    kernels::batchnorm_backward(
                        &d_out,
                        &self.bufs[*gamma].data,
                        saved,
                        *positions,
                        *c,
                        *eps,
                        *through_stats,
                        &mut d_in,
                        &mut d_g,
                        &mut d_b,
                    );
                    grad[*input] = Some(d_in);
                    grad[*gamma] = Some(d_g);
                    grad[*beta] = Some(d_b);
                }
                TapeOp::RowsGather { input, out, rows, cols } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let n_in = self.bufs[*input].data.len();
                    let mut d_in = take_grad(&mut grad, *input, n_in);
                    for (r, &src) in rows.iter().enumerate() {
                        for c in 0..*cols {
                            d_in[src * cols + c] += d_out[r * cols + c];
                        }
                    }
                    grad[*input] = Some(d_in);
                }
                TapeOp::RowsScatter { input, out, rows, cols } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let n_in = self.bufs[*input].data.len();
                    let mut d_in = take_grad(&mut grad, *input, n_in);
                    for (r, &dst) in rows.iter().enumerate() {
                        for c in 0..*cols {
                            d_in[r * cols + c] += d_out[dst * cols + c];
                        }
                    }
                    grad[*input] = Some(d_in);
                }
                TapeOp::Reshape { input, out } => {
                    let Some(d_out) = grad[*out].clone() else { continue };
                    let mut d_in = take_grad(&mut grad, *input, d_out.len());
                    for (g, &dv) in d_in.iter_mut().zip(&d_out) {
                        *g += dv;
                    }
                    grad[*input] = Some(d_in);
                }
            }
        }

        let mut result = Gradients::new();
        for (name, id) in &self.params {
            let shape = self.bufs[*id].shape.clone();
            let data = match grad[*id].take() {
                Some(g) => g,
                None => vec![0.0; self.bufs[*id].data.len()],
            };
            result.insert(name.clone(), Tensor::new(shape, data)?);
        }
        Ok(result)
    }
}

impl Default for GradientTape {
    fn default() -> Self {
        Self::new()
    }
}

fn take_grad(grad: &mut [Option<Vec<f64>>], id: BufId, len: usize) -> Vec<f64> {
    grad[id].take().unwrap_or_else(|| vec![0.0; len])
}

#[cfg(test)]
mod tests {
    use super::*;

    // y = w * x with x = 3, upstream gradient 1 => dL/dw = 3
    #[test]
    fn scalar_linear_gradient() {
        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(1, 1, vec![3.0]).unwrap());
        let w = tape.register_param("w", &Tensor::matrix(1, 1, vec![0.5]).unwrap());
        let y = tape.matmul(x, w);
        tape.set_output(y);
        let grads = tape.backward(&Tensor::matrix(1, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(grads.get("w").unwrap().data(), &[3.0]);
    }

    // Identity-weight dense layer, zero bias: ones map to ones.
    #[test]
    fn identity_dense_layer_passes_ones_through() {
        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(1, 4, vec![1.0; 4]).unwrap());
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        let w = tape.register_param("w", &Tensor::matrix(4, 4, eye).unwrap());
        let b = tape.register_param("b", &Tensor::vector(&[0.0; 4]));
        let h = tape.matmul(x, w);
        let y = tape.add_row_bias(h, b);
        assert_eq!(tape.value(y), &[1.0; 4]);
    }

    // All-zero weights: logits equal the bias.
    #[test]
    fn zero_weights_leave_only_the_bias() {
        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(2, 3, vec![0.7; 6]).unwrap());
        let w = tape.register_param("w", &Tensor::matrix(3, 2, vec![0.0; 6]).unwrap());
        let h = tape.matmul(x, w);
        assert!(tape.value(h).iter().all(|&v| v == 0.0));
        let b = tape.register_param("b", &Tensor::vector(&[0.25, -1.5]));
        let y = tape.add_row_bias(h, b);
        assert_eq!(tape.value(y), &[0.25, -1.5, 0.25, -1.5]);
    }

    // Random 2-layer net against a hand-rolled matrix-multiply oracle.
    #[test]
    fn two_layer_net_matches_hand_rolled_oracle() {
        let mut rng = crate::rng::rng_from_seed(6);
        let (b, d0, d1, d2) = (3usize, 5usize, 4usize, 2usize);
        let xs: Vec<f64> = (0..b * d0).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let w1: Vec<f64> = (0..d0 * d1).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let b1: Vec<f64> = (0..d1).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let w2: Vec<f64> = (0..d1 * d2).map(|_| crate::rng::uniform(&mut rng, -1.0, 1.0)).collect();

        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(b, d0, xs.clone()).unwrap());
        let w1_id = tape.register_param("w1", &Tensor::matrix(d0, d1, w1.clone()).unwrap());
        let b1_id = tape.register_param("b1", &Tensor::vector(&b1));
        let w2_id = tape.register_param("w2", &Tensor::matrix(d1, d2, w2.clone()).unwrap());
        let h = tape.matmul(x, w1_id);
        let h = tape.add_row_bias(h, b1_id);
        let h = tape.relu(h);
        let y = tape.matmul(h, w2_id);

        // straight-line oracle
        for s in 0..b {
            let mut hidden = vec![0.0; d1];
            for j in 0..d1 {
                let mut acc = b1[j];
                for i in 0..d0 {
                    acc += xs[s * d0 + i] * w1[i * d1 + j];
                }
                hidden[j] = acc.max(0.0);
            }
            for k in 0..d2 {
                let mut acc = 0.0;
                for j in 0..d1 {
                    acc += hidden[j] * w2[j * d2 + k];
                }
                let got = tape.value(y)[s * d2 + k];
                assert!((got - acc).abs() < 1e-12, "({s},{k}): {got} vs {acc}");
            }
        }
    }

    #[test]
    fn independent_tapes_give_identical_gradients() {
        let run = || {
            let mut tape = GradientTape::new();
            let x = tape.register_input(&Tensor::matrix(2, 3, (0..6).map(|i| i as f64 * 0.3 - 0.7).collect()).unwrap());
            let w = tape.register_param(
                "w",
                &Tensor::matrix(3, 2, (0..6).map(|i| (i as f64).sin()).collect()).unwrap(),
            );
            let b = tape.register_param("b", &Tensor::vector(&[0.1, -0.2]));
            let h = tape.matmul(x, w);
            let h = tape.add_row_bias(h, b);
            let y = tape.relu(h);
            tape.set_output(y);
            tape.backward(&Tensor::matrix(2, 2, vec![1.0; 4]).unwrap()).unwrap()
        };
        let g1 = run();
        let g2 = run();
        assert_eq!(g1, g2);
    }

    #[test]
    fn loss_grad_shape_must_match_output() {
        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let w = tape.register_param("w", &Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = tape.matmul(x, w);
        tape.set_output(y);
        let err = tape.backward(&Tensor::vector(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn unreached_params_get_zero_gradients() {
        let mut tape = GradientTape::new();
        let x = tape.register_input(&Tensor::matrix(1, 1, vec![2.0]).unwrap());
        let w = tape.register_param("w", &Tensor::matrix(1, 1, vec![1.0]).unwrap());
        let _unused = tape.register_param("dead", &Tensor::vector(&[5.0, 5.0]));
        let y = tape.matmul(x, w);
        tape.set_output(y);
        let grads = tape.backward(&Tensor::matrix(1, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(grads.get("dead").unwrap().data(), &[0.0, 0.0]);
    }
}
