//! Accuracy, fairness and catastrophic-forgetting metrics.

use crate::error::{Error, Result};
use crate::model::TaskMode;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Accuracy matrix of a domain-incremental run.
///
/// `get(eval_task, learned_after)` is the accuracy on `eval_task`'s test
/// split measured right after training on task `learned_after`; cells are
/// populated exactly for `eval_task <= learned_after` (a task is only
/// evaluated once it has been learned). Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    n: usize,
    cells: Vec<Option<f64>>,
}

impl AccuracyMatrix {
    pub fn new(n: usize) -> Self {
        AccuracyMatrix { n, cells: vec![None; n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, eval_task: usize, learned_after: usize, value: f64) -> Result<()> {
        if eval_task > learned_after || learned_after >= self.n {
            return Err(Error::Usage(format!(
                "cell (eval {eval_task}, after {learned_after}) outside the populated triangle of a {}-task run",
                self.n
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Input(format!("accuracy {value} outside [0,1]")));
        }
        self.cells[eval_task * self.n + learned_after] = Some(value);
        Ok(())
    }

    pub fn get(&self, eval_task: usize, learned_after: usize) -> Option<f64> {
        self.cells.get(eval_task * self.n + learned_after).copied().flatten()
    }

    /// True when every cell with eval_task <= learned_after is populated.
    pub fn is_complete(&self) -> bool {
        (0..self.n).all(|after| (0..=after).all(|eval| self.get(eval, after).is_some()))
    }

    /// Missing (eval, after) cells.
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let mut missing = Vec::new();
        for after in 0..self.n {
            for eval in 0..=after {
                if self.get(eval, after).is_none() {
                    missing.push((eval, after));
                }
            }
        }
        missing
    }
}

/// Classification accuracy.
///
/// Multiclass: fraction of samples whose argmax prediction matches the
/// one-hot label. Multilabel: (TP+TN)/(TP+FP+TN+FN) pooled over every
/// sample x label cell; predictions are sigmoid outputs thresholded at 0.5.
pub fn accuracy(predictions: &Tensor, labels: &Tensor, mode: TaskMode) -> Result<f64> {
    if predictions.shape() != labels.shape() {
        return Err(Error::Input(format!(
            "prediction shape {:?} vs label shape {:?}",
            predictions.shape(),
            labels.shape()
        )));
    }
    let b = predictions.shape()[0];
    if b == 0 || predictions.is_empty() {
        return Err(Error::Input("empty evaluation batch".into()));
    }
    match mode {
        TaskMode::Multiclass => {
            let mut correct = 0usize;
            for s in 0..b {
                let pred = argmax(predictions.row(s));
                let truth = argmax(labels.row(s));
                if pred == truth {
                    correct += 1;
                }
            }
            Ok(correct as f64 / b as f64)
        }
        TaskMode::Multilabel => {
            let mut correct = 0usize;
            for (&p, &y) in predictions.data().iter().zip(labels.data()) {
                let pred = p > 0.5;
                let truth = y >= 0.5;
                if pred == truth {
                    correct += 1;
                }
            }
            Ok(correct as f64 / predictions.len() as f64)
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-label accuracy breakdown for multilabel predictions (sigmoid
/// outputs, threshold 0.5): one accuracy per label column, complementing
/// the pooled-cell [`accuracy`].
pub fn per_label_accuracy(predictions: &Tensor, labels: &Tensor) -> Result<Vec<f64>> {
    if predictions.shape() != labels.shape() || predictions.shape().len() != 2 {
        return Err(Error::Input(format!(
            "prediction shape {:?} vs label shape {:?}",
            predictions.shape(),
            labels.shape()
        )));
    }
    let (b, l) = (predictions.shape()[0], predictions.shape()[1]);
    if b == 0 {
        return Err(Error::Input("empty evaluation batch".into()));
    }
    let mut out = vec![0.0; l];
    for s in 0..b {
        let p = predictions.row(s);
        let y = labels.row(s);
        for j in 0..l {
            if (p[j] > 0.5) == (y[j] >= 0.5) {
                out[j] += 1.0;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= b as f64;
    }
    Ok(out)
}

/// Fairness measure: the ratio of the lowest per-attribute accuracy to the
/// highest. 1 means equal performance across sensitive attributes.
///
/// Degenerate cases: all accuracies zero reports 1.0 (all equal), a zero
/// minimum under a positive maximum reports 0.0; both are logged.
pub fn fairness(domain_accs: &BTreeMap<String, f64>) -> Result<f64> {
    if domain_accs.is_empty() {
        return Err(Error::Input("fairness needs at least one domain accuracy".into()));
    }
    let min = domain_accs.values().copied().fold(f64::INFINITY, f64::min);
    let max = domain_accs.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == 0.0 {
        log::warn!("fairness: every domain accuracy is 0; reporting 1.0 (all equal)");
        return Ok(1.0);
    }
    if min == 0.0 {
        log::warn!("fairness: dominant accuracy {max} with a zero minimum; reporting 0.0");
        return Ok(0.0);
    }
    Ok(min / max)
}

/// Which index reading to apply to a raw accuracy matrix.
///
/// `EvalAfter` reads `m[i][j]` as accuracy on task i after learning task j
/// (the convention of [`AccuracyMatrix`]); `AfterEval` reads `m[i][j]` as
/// accuracy on task j after learning task i, i.e. the transpose. The two
/// appear interchangeably in published forgetting tables, so both are
/// supported for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CfIndexing {
    #[default]
    EvalAfter,
    AfterEval,
}

/// Catastrophic forgetting after task `i` (1-based): the mean drop on each
/// earlier task j from its just-learned accuracy a(j,j) to its accuracy
/// after task i. Negative values mean improvement (backward transfer).
/// Returns None for i = 1 (no previous tasks; tables print "X").
pub fn cf_score(a: &AccuracyMatrix, i: usize) -> Option<f64> {
    if i <= 1 || i > a.len() {
        return None;
    }
    let after = i - 1;
    let mut total = 0.0;
    for j in 0..after {
        let just_learned = a.get(j, j)?;
        let now = a.get(j, after)?;
        total += just_learned - now;
    }
    Some(total / after as f64)
}

/// [`cf_score`] over a raw lower/upper-triangular matrix under the chosen
/// index reading.
pub fn cf_score_raw(matrix: &[Vec<f64>], i: usize, indexing: CfIndexing) -> Option<f64> {
    let n = matrix.len();
    if i <= 1 || i > n {
        return None;
    }
    let after = i - 1;
    let at = |eval: usize, learned: usize| match indexing {
        CfIndexing::EvalAfter => matrix[eval][learned],
        CfIndexing::AfterEval => matrix[learned][eval],
    };
    let mut total = 0.0;
    for j in 0..after {
        total += at(j, j) - at(j, after);
    }
    Some(total / after as f64)
}

/// Mean accuracy over every learned task right after task `i` (1-based).
pub fn overall_accuracy(a: &AccuracyMatrix, i: usize) -> Option<f64> {
    if i == 0 || i > a.len() {
        return None;
    }
    let after = i - 1;
    let mut total = 0.0;
    for j in 0..i {
        total += a.get(j, after)?;
    }
    Some(total / i as f64)
}
