//! Forward and reverse passes.
//!
//! conv3x3(same) -> batch norm -> ReLU -> avg pool 2x2 -> dropout -> fc1 -> ReLU
//! -> dropout -> fc2 -> ReLU -> linear -> softmax

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{CnnConfig, KERNEL};
use super::params::{CnnParams, Gradients};
use crate::data::AttentionLabel;
use crate::math::{axpy, dot};
use crate::{Error, Result};

/// Inverted-dropout multipliers, each `0` or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// `[B][flat_len]`, applied after pooling.
    pub pooled: Vec<f64>,
    /// `[B][fc1]`, applied after the first hidden layer.
    pub hidden: Vec<f64>,
}

impl DropoutMasks {
    pub fn draw<R: Rng + ?Sized>(cfg: &CnnConfig, batch: usize, rng: &mut R) -> Self {
        let keep = 1.0 - cfg.dropout_p;
        let mut m = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let pooled = m(batch * cfg.flat_len());
        let hidden = m(batch * cfg.fc_sizes[0]);
        DropoutMasks { pooled, hidden }
    }

    /// No-op masks.
    pub fn ones(cfg: &CnnConfig, batch: usize) -> Self {
        DropoutMasks {
            pooled: vec![1.0; batch * cfg.flat_len()],
            hidden: vec![1.0; batch * cfg.fc_sizes[0]],
        }
    }
}

/// Batch statistics vs. running statistics, dropout on vs. off.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Train(&'a DropoutMasks),
    Eval,
}

/// Activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub batch: usize,
    pub conv: Vec<f64>,
    /// Normalized conv output before scale and shift, `[B][F][H][W]`.
    pub xhat: Vec<f64>,
    pub bn_out: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Per-filter batch mean and biased variance (train mode).
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub dropped: Vec<f64>,
    pub h1_pre: Vec<f64>,
    pub h1_dropped: Vec<f64>,
    pub h2_pre: Vec<f64>,
    pub h2: Vec<f64>,
    pub probs: Vec<f64>,
}

fn check_finite(layer: &str, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(alloc::format!("activation after {layer}")))
    }
}

fn dense(w: &[f64], b: &[f64], x: &[f64], n_in: usize, batch: usize) -> Vec<f64> {
    let n_out = b.len();
    let mut y = Vec::with_capacity(batch * n_out);
    for xb in x.chunks_exact(n_in) {
        for (o, bo) in b.iter().enumerate() {
            y.push(bo + dot(&w[o * n_in..(o + 1) * n_in], xb));
        }
    }
    y
}

/// Accumulates `dW`, `db` and returns `dx` for `y = W x + b`.
fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    n_in: usize,
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Vec<f64> {
    let n_out = db.len();
    let mut dx = if need_dx {
        vec![0.0; x.len()]
    } else {
        Vec::new()
    };
    for (b, (xb, dyb)) in x.chunks_exact(n_in).zip(dy.chunks_exact(n_out)).enumerate() {
        for (o, &g) in dyb.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let wo = &w[o * n_in..(o + 1) * n_in];
            axpy(g, xb, &mut dw[o * n_in..(o + 1) * n_in]);
            if need_dx {
                axpy(g, wo, &mut dx[b * n_in..(b + 1) * n_in]);
            }
        }
    }
    dx
}

fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| libm::exp(v - m)).collect();
        let s: f64 = e.iter().sum();
        p.extend(e.iter().map(|v| v / s));
    }
    p
}

/// Runs the network on `input` (`[B][S][N][N]`) and returns softmax
/// probabilities `[B][classes]` plus cached activations.
pub fn forward_cached(params: &CnnParams, input: &[f64], mode: Mode<'_>) -> Result<Activations> {
    let cfg = &params.config;
    let w = &params.weights;
    let per = cfg.input_len();
    if input.is_empty() || !input.len().is_multiple_of(per) {
        return Err(Error::ShapeMismatch {
            what: "network input".into(),
            expected: per,
            found: input.len(),
        });
    }
    let batch = input.len() / per;
    if let Mode::Train(m) = mode {
        if m.pooled.len() != batch * cfg.flat_len() || m.hidden.len() != batch * cfg.fc_sizes[0] {
            return Err(Error::ShapeMismatch {
                what: "dropout masks".into(),
                expected: batch * cfg.flat_len(),
                found: m.pooled.len(),
            });
        }
    }
    check_finite("input", input)?;
    let (s_in, f, n) = (cfg.in_channels, cfg.conv_filters, cfg.input_size);
    let plane = n * n;

    // convolution, zero padding of one cell
    let mut conv = vec![0.0; batch * f * plane];
    for b in 0..batch {
        for fi in 0..f {
            let out = &mut conv[(b * f + fi) * plane..(b * f + fi + 1) * plane];
            out.fill(w.conv_b[fi]);
            for si in 0..s_in {
                let inp = &input[(b * s_in + si) * plane..(b * s_in + si + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let wt = w.conv_w[((fi * s_in + si) * KERNEL + ky) * KERNEL + kx];
                        let (x0, x1) = (1usize.saturating_sub(kx), (n + 1 - kx).min(n));
                        for y in 1usize.saturating_sub(ky)..(n + 1 - ky).min(n) {
                            let iy = y + ky - 1;
                            let src = &inp[iy * n + x0 + kx - 1..iy * n + x1 + kx - 1];
                            axpy(wt, src, &mut out[y * n + x0..y * n + x1]);
                        }
                    }
                }
            }
        }
    }
    check_finite("conv", &conv)?;

    // batch norm
    let count = (batch * plane) as f64;
    let (mut mean, mut var) = (vec![0.0; f], vec![0.0; f]);
    match mode {
        Mode::Train(_) => {
            for fi in 0..f {
                let mut s = 0.0;
                for b in 0..batch {
                    s += conv[(b * f + fi) * plane..(b * f + fi + 1) * plane]
                        .iter()
                        .sum::<f64>();
                }
                let mu = s / count;
                let mut v = 0.0;
                for b in 0..batch {
                    v += conv[(b * f + fi) * plane..(b * f + fi + 1) * plane]
                        .iter()
                        .map(|x| (x - mu) * (x - mu))
                        .sum::<f64>();
                }
                mean[fi] = mu;
                var[fi] = v / count;
            }
        }
        Mode::Eval => {
            mean.copy_from_slice(&params.running_mean);
            var.copy_from_slice(&params.running_var);
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|v| 1.0 / libm::sqrt(v + cfg.bn_epsilon))
        .collect();
    let mut xhat = vec![0.0; conv.len()];
    let mut bn_out = vec![0.0; conv.len()];
    for (k, ((xh, y), c)) in xhat
        .iter_mut()
        .zip(bn_out.iter_mut())
        .zip(&conv)
        .enumerate()
    {
        let fi = (k / plane) % f;
        *xh = (c - mean[fi]) * inv_std[fi];
        *y = w.bn_gamma[fi] * *xh + w.bn_beta[fi];
    }

    // ReLU + 2x2 average pool
    let half = n / 2;
    let mut pooled = vec![0.0; batch * f * half * half];
    for (pi, p) in pooled.iter_mut().enumerate() {
        let (bf, r) = (pi / (half * half), pi % (half * half));
        let (py, px) = (r / half, r % half);
        let base = bf * plane + 2 * py * n + 2 * px;
        let s = bn_out[base].max(0.0)
            + bn_out[base + 1].max(0.0)
            + bn_out[base + n].max(0.0)
            + bn_out[base + n + 1].max(0.0);
        *p = 0.25 * s;
    }
    let dropped = match mode {
        Mode::Train(m) => pooled.iter().zip(&m.pooled).map(|(a, b)| a * b).collect(),
        Mode::Eval => pooled,
    };

    let [h1, h2] = cfg.fc_sizes;
    let h1_pre = dense(&w.fc1_w, &w.fc1_b, &dropped, cfg.flat_len(), batch);
    check_finite("fc1", &h1_pre)?;
    let h1_dropped: Vec<f64> = match mode {
        Mode::Train(m) => h1_pre
            .iter()
            .zip(&m.hidden)
            .map(|(a, b)| a.max(0.0) * b)
            .collect(),
        Mode::Eval => h1_pre.iter().map(|a| a.max(0.0)).collect(),
    };
    let h2_pre = dense(&w.fc2_w, &w.fc2_b, &h1_dropped, h1, batch);
    check_finite("fc2", &h2_pre)?;
    let h2v: Vec<f64> = h2_pre.iter().map(|a| a.max(0.0)).collect();
    let logits = dense(&w.out_w, &w.out_b, &h2v, h2, batch);
    check_finite("output", &logits)?;
    let probs = softmax_rows(&logits, cfg.classes);

    Ok(Activations {
        batch,
        conv,
        xhat,
        bn_out,
        inv_std,
        batch_mean: mean,
        batch_var: var,
        dropped,
        h1_pre,
        h1_dropped,
        h2_pre,
        h2: h2v,
        probs,
    })
}

/// Softmax probabilities `[B][classes]`.
pub fn forward(params: &CnnParams, input: &[f64], mode: Mode<'_>) -> Result<Vec<f64>> {
    forward_cached(params, input, mode).map(|a| a.probs)
}

/// Mean cross-entropy of `probs` against class indices.
pub fn cross_entropy(probs: &[f64], labels: &[AttentionLabel], classes: usize) -> f64 {
    let s: f64 = probs
        .chunks_exact(classes)
        .zip(labels)
        .map(|(p, l)| -libm::log(p[l.class_index()]))
        .sum();
    s / labels.len() as f64
}

/// Loss, gradients of every trainable tensor and the cached activations.
pub fn loss_and_grad(
    params: &CnnParams,
    input: &[f64],
    labels: &[AttentionLabel],
    masks: &DropoutMasks,
) -> Result<(f64, Gradients, Activations)> {
    let act = forward_cached(params, input, Mode::Train(masks))?;
    let cfg = &params.config;
    let w = &params.weights;
    let batch = act.batch;
    if labels.len() != batch {
        return Err(Error::ShapeMismatch {
            what: "labels".into(),
            expected: batch,
            found: labels.len(),
        });
    }
    let classes = cfg.classes;
    let loss = cross_entropy(&act.probs, labels, classes);
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let mut g = Gradients::zeros(cfg);
    let [h1, h2] = cfg.fc_sizes;

    let mut dlogits = act.probs.clone();
    for (row, l) in dlogits.chunks_exact_mut(classes).zip(labels) {
        row[l.class_index()] -= 1.0;
        row.iter_mut().for_each(|v| *v /= batch as f64);
    }
    let mut dh2 = dense_backward(
        &w.out_w,
        &act.h2,
        &dlogits,
        h2,
        &mut g.out_w,
        &mut g.out_b,
        true,
    );
    for (d, z) in dh2.iter_mut().zip(&act.h2_pre) {
        if *z <= 0.0 {
            *d = 0.0;
        }
    }
    let mut dh1 = dense_backward(
        &w.fc2_w,
        &act.h1_dropped,
        &dh2,
        h1,
        &mut g.fc2_w,
        &mut g.fc2_b,
        true,
    );
    for ((d, z), m) in dh1.iter_mut().zip(&act.h1_pre).zip(&masks.hidden) {
        *d = if *z > 0.0 { *d * m } else { 0.0 };
    }
    let flat = cfg.flat_len();
    let mut dpool = dense_backward(
        &w.fc1_w,
        &act.dropped,
        &dh1,
        flat,
        &mut g.fc1_w,
        &mut g.fc1_b,
        true,
    );
    for (d, m) in dpool.iter_mut().zip(&masks.pooled) {
        *d *= m;
    }

    // un-pool through ReLU
    let (f, n) = (cfg.conv_filters, cfg.input_size);
    let (plane, half) = (n * n, n / 2);
    let mut dy = vec![0.0; act.bn_out.len()];
    for (k, d) in dy.iter_mut().enumerate() {
        let (bf, r) = (k / plane, k % plane);
        let (y, x) = (r / n, r % n);
        if act.bn_out[k] > 0.0 {
            *d = 0.25 * dpool[bf * half * half + (y / 2) * half + x / 2];
        }
    }

    // batch norm with batch statistics
    let count = (batch * plane) as f64;
    let mut dxhat_sum = vec![0.0; f];
    let mut dxhat_xhat = vec![0.0; f];
    for (k, d) in dy.iter().enumerate() {
        let fi = (k / plane) % f;
        g.bn_beta[fi] += d;
        g.bn_gamma[fi] += d * act.xhat[k];
        let dxh = d * w.bn_gamma[fi];
        dxhat_sum[fi] += dxh;
        dxhat_xhat[fi] += dxh * act.xhat[k];
    }
    let mut dconv = vec![0.0; dy.len()];
    for (k, dc) in dconv.iter_mut().enumerate() {
        let fi = (k / plane) % f;
        let dxh = dy[k] * w.bn_gamma[fi];
        *dc =
            act.inv_std[fi] / count * (count * dxh - dxhat_sum[fi] - act.xhat[k] * dxhat_xhat[fi]);
    }

    // convolution weights
    let s_in = cfg.in_channels;
    for b in 0..batch {
        for fi in 0..f {
            let dout = &dconv[(b * f + fi) * plane..(b * f + fi + 1) * plane];
            g.conv_b[fi] += dout.iter().sum::<f64>();
            for si in 0..s_in {
                let inp = &input[(b * s_in + si) * plane..(b * s_in + si + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let (x0, x1) = (1usize.saturating_sub(kx), (n + 1 - kx).min(n));
                        let mut acc = 0.0;
                        for y in 1usize.saturating_sub(ky)..(n + 1 - ky).min(n) {
                            let iy = y + ky - 1;
                            acc += dot(
                                &dout[y * n + x0..y * n + x1],
                                &inp[iy * n + x0 + kx - 1..iy * n + x1 + kx - 1],
                            );
                        }
                        g.conv_w[((fi * s_in + si) * KERNEL + ky) * KERNEL + kx] += acc;
                    }
                }
            }
        }
    }
    Ok((loss, g, act))
}
