//! Classification losses returning (scalar loss, gradient w.r.t. logits).
//!
//! Both losses use log-sum-exp / log-sigmoid formulations so the returned
//! values stay finite for any finite logits.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weighted softmax cross-entropy over a batch.
///
/// loss = -(1/B) * sum_s w_s * sum_c y_sc * log softmax(z_s)_c
///
/// `labels` rows must be exactly one-hot; `weights` has one positive entry
/// per sample (all ones gives the unweighted loss).
pub fn loss_softmax_ce(
    logits: &Tensor,
    labels: &Tensor,
    weights: &[f64],
) -> Result<(f64, Tensor)> {
    if logits.shape() != labels.shape() {
        return Err(Error::Input(format!(
            "logits shape {:?} vs labels shape {:?}",
            logits.shape(),
            labels.shape()
        )));
    }
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    if weights.len() != b {
        return Err(Error::Input(format!("{} weights for batch of {b}", weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Input(format!("non-positive sample weight {w}")));
    }
    logits.check_finite("logits")?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; b * c];
    for s in 0..b {
        let row = logits.row(s);
        let lrow = labels.row(s);
        let mut hot = None;
        for (j, &y) in lrow.iter().enumerate() {
            if y == 1.0 {
                if hot.replace(j).is_some() {
                    return Err(Error::Input(format!("labels row {s} has multiple ones")));
                }
            } else if y != 0.0 {
                return Err(Error::Input(format!("labels row {s} is not one-hot (value {y})")));
            }
        }
        let hot = hot.ok_or_else(|| Error::Input(format!("labels row {s} has no one")))?;

        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        loss += weights[s] * (log_z - row[hot]);
        let scale = weights[s] / b as f64;
        for j in 0..c {
            let p = (row[j] - log_z).exp();
            grad[s * c + j] = scale * (p - lrow[j]);
        }
    }
    loss /= b as f64;
    Ok((loss, Tensor::new(vec![b, c], grad)?))
}

/// Mean binary cross-entropy on sigmoid outputs over all sample-label cells.
///
/// Labels must be 0/1; the mean runs over B*L cells.
pub fn loss_sigmoid_bce(logits: &Tensor, labels: &Tensor) -> Result<(f64, Tensor)> {
    if logits.shape() != labels.shape() {
        return Err(Error::Input(format!(
            "logits shape {:?} vs labels shape {:?}",
            logits.shape(),
            labels.shape()
        )));
    }
    logits.check_finite("logits")?;
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, (&z, &y)) in logits.data().iter().zip(labels.data()).enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Input(format!("label {y} at cell {i} is not in {{0,1}}")));
        }
        // -[y*log(sig(z)) + (1-y)*log(1-sig(z))] = max(z,0) - y*z + log(1+exp(-|z|))
        loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        grad[i] = (sigmoid(z) - y) / n;
    }
    loss /= n;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a [B, C] tensor; each output row sums to 1.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    let mut out = vec![0.0; b * c];
    for s in 0..b {
        let row = logits.row(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for j in 0..c {
            let e = (row[j] - max).exp();
            out[s * c + j] = e;
            z += e;
        }
        for j in 0..c {
            out[s * c + j] /= z;
        }
    }
    Tensor::new(vec![b, c], out).expect("softmax shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(b: usize, c: usize, hot: &[usize]) -> Tensor {
        let mut data = vec![0.0; b * c];
        for (s, &h) in hot.iter().enumerate() {
            data[s * c + h] = 1.0;
        }
        Tensor::new(vec![b, c], data).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::matrix(1, 4, vec![0.0; 4]).unwrap();
        let labels = one_hot(1, 4, &[2]);
        let (loss, _) = loss_softmax_ce(&logits, &labels, &[1.0]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn loss_is_linear_in_weights() {
        let logits =
            Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.77).sin()).collect()).unwrap();
        let labels = one_hot(3, 4, &[0, 3, 1]);
        let w1 = [0.5, 1.25, 2.0];
        let w2: Vec<f64> = w1.iter().map(|w| w * 2.0).collect();
        let (l1, g1) = loss_softmax_ce(&logits, &labels, &w1).unwrap();
        let (l2, g2) = loss_softmax_ce(&logits, &labels, &w2).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert!((b - 2.0 * a).abs() < 1e-12);
        }
    }

    // Hand-summed per-sample cross-entropies on a 3-sample batch.
    #[test]
    fn weighted_loss_matches_scalar_oracle() {
        let logits = Tensor::matrix(
            3,
            3,
            vec![0.3, -1.2, 0.9, 2.0, 0.1, -0.4, -0.7, 0.0, 1.5],
        )
        .unwrap();
        let hot = [2usize, 0, 1];
        let labels = one_hot(3, 3, &hot);
        let weights = [1.5, 0.25, 3.0];

        let mut expected = 0.0;
        for s in 0..3 {
            let row = logits.row(s);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            expected += weights[s] * -(row[hot[s]].exp() / z).ln();
        }
        expected /= 3.0;

        let (loss, _) = loss_softmax_ce(&logits, &labels, &weights).unwrap();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn non_one_hot_rows_are_rejected() {
        let logits = Tensor::matrix(1, 3, vec![0.0; 3]).unwrap();
        for bad in [vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]] {
            let labels = Tensor::matrix(1, 3, bad).unwrap();
            assert!(loss_softmax_ce(&logits, &labels, &[1.0]).is_err());
        }
    }

    #[test]
    fn unweighted_equals_all_ones() {
        let logits =
            Tensor::matrix(2, 5, (0..10).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        let labels = one_hot(2, 5, &[4, 0]);
        let (l_ones, g_ones) = loss_softmax_ce(&logits, &labels, &[1.0, 1.0]).unwrap();
        // definitionally unweighted: mean over samples of CE
        let mut expected = 0.0;
        for s in 0..2 {
            let row = logits.row(s);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            expected += -(row[labels.row(s).iter().position(|&y| y == 1.0).unwrap()].exp() / z).ln();
        }
        expected /= 2.0;
        assert!((l_ones - expected).abs() < 1e-12);
        assert_eq!(g_ones.shape(), &[2, 5]);
    }

    #[test]
    fn bce_known_values() {
        let logits = Tensor::matrix(1, 1, vec![0.0]).unwrap();
        let labels = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let (loss, _) = loss_sigmoid_bce(&logits, &labels).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);

        let logits = Tensor::matrix(1, 2, vec![20.0, 20.0]).unwrap();
        let labels = Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        let (loss, _) = loss_sigmoid_bce(&logits, &labels).unwrap();
        assert!(loss < 1e-8, "{loss}");
    }

    // Elementwise oracle on a random batch.
    #[test]
    fn bce_matches_elementwise_oracle() {
        let mut rng = crate::rng::rng_from_seed(9);
        let b = 4;
        let l = 12;
        let logits = Tensor::new(
            vec![b, l],
            (0..b * l).map(|_| crate::rng::uniform(&mut rng, -3.0, 3.0)).collect(),
        )
        .unwrap();
        let labels = Tensor::new(
            vec![b, l],
            (0..b * l).map(|_| f64::from(rng.random::<bool>())).collect(),
        )
        .unwrap();
        let mut expected = 0.0;
        for (&z, &y) in logits.data().iter().zip(labels.data()) {
            let p = 1.0 / (1.0 + (-z).exp());
            expected += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        }
        expected /= (b * l) as f64;
        let (loss, grad) = loss_sigmoid_bce(&logits, &labels).unwrap();
        assert!((loss - expected).abs() < 1e-12);
        for ((&z, &y), &g) in logits.data().iter().zip(labels.data()).zip(grad.data()) {
            let p = 1.0 / (1.0 + (-z).exp());
            assert!((g - (p - y) / (b * l) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_rejects_non_binary_labels() {
        let logits = Tensor::matrix(1, 1, vec![0.0]).unwrap();
        let labels = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        assert!(loss_sigmoid_bce(&logits, &labels).is_err());
    }

    #[test]
    fn sigmoid_stays_inside_unit_interval() {
        // Strictly open wherever f64 can represent it; beyond |z| ~ 37 the
        // true value sits within half an ulp of the boundary.
        for z in [-30.0, -1e-9, 0.0, 1e-9, 30.0] {
            let s = sigmoid(z);
            assert!(s > 0.0 && s < 1.0, "sigmoid({z}) = {s}");
        }
        assert!(sigmoid(-745.0) > 0.0);
        assert!(sigmoid(745.0) <= 1.0);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = crate::rng::rng_from_seed(4);
        let t = Tensor::new(
            vec![6, 9],
            (0..54).map(|_| crate::rng::uniform(&mut rng, -30.0, 30.0)).collect(),
        )
        .unwrap();
        let p = softmax_rows(&t);
        for r in 0..6 {
            let s: f64 = p.row(r).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "row {r} sums to {s}");
            assert!(p.row(r).iter().all(|&v| v > 0.0 && v < 1.0 + 1e-12));
        }
    }

    use rand::Rng;
}
