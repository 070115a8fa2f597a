//! Forward/backward kernels for the layer set.
//!
//! All kernels work on flat row-major `f64` slices. Image tensors are NHWC;
//! conv weights are [KH, KW, Cin, Cout]; dense weights are [in, out].
//! Convolutions are 3x3, stride 1, zero 'same' padding; pooling is 2x2
//! stride 2 with floor semantics (a trailing odd row/column is dropped,
//! except that a dimension of 1 is kept as-is).

/// out[m,n] = sum_k a[m,k] * b[k,n]
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// dA[m,k] = dOut[m,n] * B^T; dB[k,n] = A^T * dOut.
pub fn matmul_backward(
    a: &[f64],
    b: &[f64],
    d_out: &[f64],
    m: usize,
    k: usize,
    n: usize,
    d_a: &mut [f64],
    d_b: &mut [f64],
) {
    for i in 0..m {
        for p in 0..k {
            let mut acc = 0.0;
            let brow = &b[p * n..(p + 1) * n];
            let drow = &d_out[i * n..(i + 1) * n];
            for (bv, dv) in brow.iter().zip(drow) {
                acc += bv * dv;
            }
            d_a[i * k + p] += acc;
        }
    }
    for p in 0..k {
        for i in 0..m {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let drow = &d_out[i * n..(i + 1) * n];
            let brow = &mut d_b[p * n..(p + 1) * n];
            for (bg, &dv) in brow.iter_mut().zip(drow) {
                *bg += av * dv;
            }
        }
    }
}

/// 3x3 same-padding stride-1 convolution over NHWC input.
/// weight: [3, 3, cin, cout], bias: [cout], out: [b, h, w, cout].
pub fn conv2d(
    input: &[f64],
    weight: &[f64],
    bias: &[f64],
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(input.len(), b * h * w * cin);
    debug_assert_eq!(weight.len(), 9 * cin * cout);
    debug_assert_eq!(out.len(), b * h * w * cout);
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let o_base = ((bi * h + y) * w + x) * cout;
                out[o_base..o_base + cout].copy_from_slice(bias);
                for ky in 0..3usize {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = x as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i_base = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let w_base = (ky * 3 + kx) * cin * cout;
                        for ci in 0..cin {
                            let iv = input[i_base + ci];
                            if iv == 0.0 {
                                continue;
                            }
                            let wrow = &weight[w_base + ci * cout..w_base + (ci + 1) * cout];
                            let orow = &mut out[o_base..o_base + cout];
                            for (o, &wv) in orow.iter_mut().zip(wrow) {
                                *o += iv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    input: &[f64],
    weight: &[f64],
    d_out: &[f64],
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    d_input: &mut [f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
) {
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let o_base = ((bi * h + y) * w + x) * cout;
                let drow = &d_out[o_base..o_base + cout];
                for (db, &dv) in d_bias.iter_mut().zip(drow) {
                    *db += dv;
                }
                for ky in 0..3usize {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = x as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i_base = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let w_base = (ky * 3 + kx) * cin * cout;
                        for ci in 0..cin {
                            let iv = input[i_base + ci];
                            let wrow = &weight[w_base + ci * cout..w_base + (ci + 1) * cout];
                            let dwrow =
                                &mut d_weight[w_base + ci * cout..w_base + (ci + 1) * cout];
                            let mut acc = 0.0;
                            for ((dw, &wv), &dv) in dwrow.iter_mut().zip(wrow).zip(drow) {
                                *dw += iv * dv;
                                acc += wv * dv;
                            }
                            d_input[i_base + ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

/// Output spatial size under 2x2/2 pooling: floor(h/2) but never 0.
pub fn pooled_dim(d: usize) -> usize {
    (d / 2).max(1)
}

/// 2x2 stride-2 max pooling; records the argmax flat input index per output
/// cell for the backward scatter.
pub fn maxpool2(
    input: &[f64],
    b: usize,
    h: usize,
    w: usize,
    c: usize,
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let oh = pooled_dim(h);
    let ow = pooled_dim(w);
    debug_assert_eq!(out.len(), b * oh * ow * c);
    for bi in 0..b {
        for oy in 0..oh {
            let y0 = oy * 2;
            let y1 = (y0 + 2).min(h).max(y0 + 1);
            for ox in 0..ow {
                let x0 = ox * 2;
                let x1 = (x0 + 2).min(w).max(x0 + 1);
                let o_base = ((bi * oh + oy) * ow + ox) * c;
                for ci in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let idx = ((bi * h + y) * w + x) * c + ci;
                            if input[idx] > best {
                                best = input[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[o_base + ci] = best;
                    argmax[o_base + ci] = best_idx;
                }
            }
        }
    }
}

/// Per-channel batch statistics over all N*H*W positions of NHWC data.
#[derive(Debug)]
pub struct BatchNormSaved {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub x_hat: Vec<f64>,
}

/// Batch-norm forward with explicit statistics; `use_batch_stats` selects
/// training (batch statistics) vs evaluation (supplied running statistics).
#[allow(clippy::too_many_arguments)]
pub fn batchnorm(
    input: &[f64],
    gamma: &[f64],
    beta: &[f64],
    positions: usize,
    c: usize,
    eps: f64,
    stats: Option<(&[f64], &[f64])>,
    out: &mut [f64],
) -> BatchNormSaved {
    let (mean, var) = match stats {
        Some((m, v)) => (m.to_vec(), v.to_vec()),
        None => {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for p in 0..positions {
                for ci in 0..c {
                    mean[ci] += input[p * c + ci];
                }
            }
            for m in mean.iter_mut() {
                *m /= positions as f64;
            }
            for p in 0..positions {
                for ci in 0..c {
                    let d = input[p * c + ci] - mean[ci];
                    var[ci] += d * d;
                }
            }
            for v in var.iter_mut() {
                *v /= positions as f64;
            }
            (mean, var)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let mut x_hat = vec![0.0; input.len()];
    for p in 0..positions {
        for ci in 0..c {
            let xh = (input[p * c + ci] - mean[ci]) * inv_std[ci];
            x_hat[p * c + ci] = xh;
            out[p * c + ci] = gamma[ci] * xh + beta[ci];
        }
    }
    BatchNormSaved { mean, var, x_hat }
}

/// Backward through training-mode batch-norm (batch statistics participate
/// in the Jacobian). For eval mode pass `through_stats = false` and the
/// mapping is a fixed affine transform.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_backward(
    d_out: &[f64],
    gamma: &[f64],
    saved: &BatchNormSaved,
    positions: usize,
    c: usize,
    eps: f64,
    through_stats: bool,
    d_input: &mut [f64],
    d_gamma: &mut [f64],
    d_beta: &mut [f64],
) {
    let n = positions as f64;
    let inv_std: Vec<f64> = saved.var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for p in 0..positions {
        for ci in 0..c {
            let dy = d_out[p * c + ci];
            sum_dy[ci] += dy;
            sum_dy_xhat[ci] += dy * saved.x_hat[p * c + ci];
        }
    }
    for ci in 0..c {
        d_gamma[ci] += sum_dy_xhat[ci];
        d_beta[ci] += sum_dy[ci];
    }
    for p in 0..positions {
        for ci in 0..c {
            let dy = d_out[p * c + ci];
            let g = gamma[ci] * inv_std[ci];
            let dx = if through_stats {
                g * (dy - sum_dy[ci] / n - saved.x_hat[p * c + ci] * sum_dy_xhat[ci] / n)
            } else {
                g * dy
            };
            d_input[p * c + ci] += dx;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_case() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut out = [0.0; 4];
        matmul(&a, &b, 2, 2, 2, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn conv_identity_kernel_passes_through() {
        // Center tap 1, rest 0: output equals input away from edges too
        // (same padding keeps shape).
        let (b, h, w) = (1, 4, 4);
        let input: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let mut weight = vec![0.0; 9];
        weight[4] = 1.0; // ky=1,kx=1,cin=0,cout=0
        let bias = [0.0];
        let mut out = vec![0.0; 16];
        conv2d(&input, &weight, &bias, b, h, w, 1, 1, &mut out);
        assert_eq!(out, input);
    }

    #[test]
    fn maxpool_picks_window_max() {
        let input = [1.0, 5.0, 2.0, 0.0, 3.0, -1.0, 4.0, 2.5];
        // shape [1, 2, 4, 1] -> out [1, 1, 2, 1]
        let mut out = vec![0.0; 2];
        let mut arg = vec![0usize; 2];
        maxpool2(&input, 1, 2, 4, 1, &mut out, &mut arg);
        assert_eq!(out, vec![5.0, 4.0]);
        assert_eq!(arg, vec![1, 6]);
    }

    #[test]
    fn pooling_keeps_unit_dims() {
        assert_eq!(pooled_dim(1), 1);
        assert_eq!(pooled_dim(2), 1);
        assert_eq!(pooled_dim(5), 2);
        let input = [2.0, -3.0];
        // [1,1,2,1] -> width pools to 1, height stays 1
        let mut out = vec![0.0; 1];
        let mut arg = vec![0usize; 1];
        maxpool2(&input, 1, 1, 2, 1, &mut out, &mut arg);
        assert_eq!(out, vec![2.0]);
    }

    #[test]
    fn batchnorm_normalizes_batch() {
        let input = [1.0, 3.0, 5.0, 7.0]; // one channel, 4 positions
        let mut out = vec![0.0; 4];
        let saved = batchnorm(&input, &[1.0], &[0.0], 4, 1, 1e-5, None, &mut out);
        assert!((saved.mean[0] - 4.0).abs() < 1e-12);
        let m: f64 = out.iter().sum::<f64>() / 4.0;
        let v: f64 = out.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-4);
    }
}
