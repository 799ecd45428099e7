// SPDX-License-Identifier: MIT OR Apache-2.0

//! Batched bidirectional LSTM forward pass and exact backpropagation through
//! time for the combined reconstruction / classification objective.
//!
//! Inputs are stacked as a `(K * B, L)` matrix whose row `t * B + i` is token
//! `t` of batch item `i`. The forward cell reads positions `0..K`, the
//! backward cell `K..0`. The classification feature is
//! `relu(W_d [h_f(K-1) ; h_b(0)] + b_d)`; the reconstruction of a masked
//! position `m` is `W_r [h_f(m) ; h_b(m)] + b_r`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{EncoderParams, LstmParams};
use crate::error::{Error, Result};
use crate::series::ComponentSequence;
use crate::tokenizer::MaskPlan;

/// One training example: the masked input, the unmasked original it was made
/// from, the plan that produced it, and the class.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub input: &'a ComponentSequence,
    pub target: &'a ComponentSequence,
    pub plan: &'a MaskPlan,
    pub label: usize,
}

/// Loss components and the weights that combined them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub mae_loss: f64,
    pub ce_loss: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LossReport {
    fn new(mae_loss: f64, ce_loss: f64, (lambda1, lambda2): (f64, f64)) -> Self {
        Self {
            mae_loss,
            ce_loss,
            total: lambda1 * mae_loss + lambda2 * ce_loss,
            lambda1,
            lambda2,
        }
    }
}

struct DirectionCache {
    /// Post-activation gates `[i | f | g | o]`, `(B, 4H)` per position.
    gates: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
}

pub(crate) struct Forward {
    k: usize,
    b: usize,
    x: Array2<f64>,
    fwd: DirectionCache,
    bwd: DirectionCache,
    q: Array2<f64>,
    dense_pre: Array2<f64>,
    dense_out: Array2<f64>,
    logits: Array2<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Position processed before `t`, if any.
#[inline]
fn previous(t: usize, k: usize, reverse: bool) -> Option<usize> {
    if reverse {
        (t + 1 < k).then_some(t + 1)
    } else {
        t.checked_sub(1)
    }
}

#[inline]
fn position(step: usize, k: usize, reverse: bool) -> usize {
    if reverse {
        k - 1 - step
    } else {
        step
    }
}

fn run_direction(
    cell: &LstmParams,
    x: &Array2<f64>,
    k: usize,
    b: usize,
    reverse: bool,
) -> DirectionCache {
    let h = cell.w_h.ncols();
    let mut xproj = x.dot(&cell.w_x.t());
    xproj += &cell.b;
    let empty = || vec![Array2::<f64>::zeros((0, 0)); k];
    let mut cache = DirectionCache {
        gates: empty(),
        c: empty(),
        tanh_c: empty(),
        h: empty(),
    };
    let mut h_prev = Array2::<f64>::zeros((b, h));
    let mut c_prev = Array2::<f64>::zeros((b, h));
    for step in 0..k {
        let t = position(step, k, reverse);
        let mut z = xproj.slice(s![t * b..(t + 1) * b, ..]).to_owned();
        general_mat_mul(1.0, &h_prev, &cell.w_h.t(), 1.0, &mut z);
        let mut c = Array2::<f64>::zeros((b, h));
        let mut tanh_c = Array2::<f64>::zeros((b, h));
        let mut hh = Array2::<f64>::zeros((b, h));
        for r in 0..b {
            let zr = z.row_mut(r).into_slice().expect("contiguous");
            for j in 0..h {
                zr[j] = sigmoid(zr[j]);
                zr[h + j] = sigmoid(zr[h + j]);
                zr[2 * h + j] = zr[2 * h + j].tanh();
                zr[3 * h + j] = sigmoid(zr[3 * h + j]);
                let cv = zr[h + j] * c_prev[[r, j]] + zr[j] * zr[2 * h + j];
                let tc = cv.tanh();
                c[[r, j]] = cv;
                tanh_c[[r, j]] = tc;
                hh[[r, j]] = zr[3 * h + j] * tc;
            }
        }
        h_prev = hh.clone();
        c_prev = c.clone();
        cache.gates[t] = z;
        cache.c[t] = c;
        cache.tanh_c[t] = tanh_c;
        cache.h[t] = hh;
    }
    cache
}

/// BPTT for one direction. `dh_ext[t]` is the loss gradient reaching `h(t)`
/// from outside the recurrence.
#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    cell: &LstmParams,
    cache: &DirectionCache,
    x: &Array2<f64>,
    dh_ext: &[Array2<f64>],
    k: usize,
    b: usize,
    reverse: bool,
    grad: &mut LstmParams,
) {
    let h = cell.w_h.ncols();
    let mut dz_all = Array2::<f64>::zeros((k * b, 4 * h));
    let mut dh_next = Array2::<f64>::zeros((b, h));
    let mut dc_next = Array2::<f64>::zeros((b, h));
    for step in (0..k).rev() {
        let t = position(step, k, reverse);
        let prev = previous(t, k, reverse);
        let gates = &cache.gates[t];
        let tanh_c = &cache.tanh_c[t];
        let mut dz = dz_all.slice_mut(s![t * b..(t + 1) * b, ..]);
        for r in 0..b {
            for j in 0..h {
                let (i, f, g, o) = (
                    gates[[r, j]],
                    gates[[r, h + j]],
                    gates[[r, 2 * h + j]],
                    gates[[r, 3 * h + j]],
                );
                let tc = tanh_c[[r, j]];
                let c_prev = prev.map_or(0.0, |p| cache.c[p][[r, j]]);
                let dh = dh_ext[t][[r, j]] + dh_next[[r, j]];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[[r, j]];
                dz[[r, j]] = dc * g * i * (1.0 - i);
                dz[[r, h + j]] = dc * c_prev * f * (1.0 - f);
                dz[[r, 2 * h + j]] = dc * i * (1.0 - g * g);
                dz[[r, 3 * h + j]] = d_o * o * (1.0 - o);
                dc_next[[r, j]] = dc * f;
            }
        }
        let dz = dz_all.slice(s![t * b..(t + 1) * b, ..]);
        dh_next = dz.dot(&cell.w_h);
        if let Some(p) = prev {
            general_mat_mul(1.0, &dz.t(), &cache.h[p], 1.0, &mut grad.w_h);
        }
    }
    general_mat_mul(1.0, &dz_all.t(), x, 1.0, &mut grad.w_x);
    grad.b += &dz_all.sum_axis(Axis(0));
}

fn stack_inputs(p: &EncoderParams, inputs: &[&ComponentSequence]) -> Result<(usize, Array2<f64>)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("empty batch".into()))?;
    let (k, l) = (first.k(), p.dims.input_len);
    if k == 0 {
        return Err(Error::DimensionMismatch("sequence has no tokens".into()));
    }
    let b = inputs.len();
    let mut x = Array2::<f64>::zeros((k * b, l));
    for (i, cs) in inputs.iter().enumerate() {
        if cs.k() != k {
            return Err(Error::DimensionMismatch(format!(
                "batch mixes {} and {} tokens",
                k,
                cs.k()
            )));
        }
        if cs.padded_len() != l {
            return Err(Error::DimensionMismatch(format!(
                "token length {} but encoder expects {}",
                cs.padded_len(),
                l
            )));
        }
        for t in 0..k {
            x.row_mut(t * b + i).assign(&cs.tokens.row(t));
        }
    }
    Ok((k, x))
}

pub(crate) fn forward(p: &EncoderParams, inputs: &[&ComponentSequence]) -> Result<Forward> {
    let (k, x) = stack_inputs(p, inputs)?;
    let b = inputs.len();
    let h = p.dims.hidden;
    let fwd = run_direction(&p.fwd, &x, k, b, false);
    let bwd = run_direction(&p.bwd, &x, k, b, true);
    let mut q = Array2::<f64>::zeros((b, 2 * h));
    q.slice_mut(s![.., ..h]).assign(&fwd.h[k - 1]);
    q.slice_mut(s![.., h..]).assign(&bwd.h[0]);
    let mut dense_pre = q.dot(&p.dense_w.t());
    dense_pre += &p.dense_b;
    let dense_out = dense_pre.mapv(|v| v.max(0.0));
    let mut logits = dense_out.dot(&p.class_w.t());
    logits += &p.class_b;
    Ok(Forward {
        k,
        b,
        x,
        fwd,
        bwd,
        q,
        dense_pre,
        dense_out,
        logits,
    })
}

impl Forward {
    /// `[h_f(t) ; h_b(t)]` for batch item `i`.
    fn position_feature(&self, i: usize, t: usize) -> Array1<f64> {
        let h = self.fwd.h[t].ncols();
        let mut v = Array1::zeros(2 * h);
        v.slice_mut(s![..h]).assign(&self.fwd.h[t].row(i));
        v.slice_mut(s![h..]).assign(&self.bwd.h[t].row(i));
        v
    }

    fn position_features(&self, i: usize) -> Array2<f64> {
        let h = self.fwd.h[0].ncols();
        let mut out = Array2::zeros((self.k, 2 * h));
        for t in 0..self.k {
            out.row_mut(t).assign(&self.position_feature(i, t));
        }
        out
    }
}

/// Stable softmax probabilities and `-ln p[label]`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (Vec<f64>, f64) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let lse = m + sum.ln();
    let probs = logits.iter().map(|l| (l - lse).exp()).collect();
    (probs, lse - logits[label])
}

struct Reconstruction {
    /// `(item, position)` per row.
    rows: Vec<(usize, usize)>,
    /// Per-row loss weight `1 / (items_with_mask * |M_item| * true_len)`.
    weights: Vec<f64>,
    features: Array2<f64>,
    residual: Array2<f64>,
    loss: f64,
}

fn reconstruct(p: &EncoderParams, fw: &Forward, batch: &[BatchItem<'_>]) -> Result<Reconstruction> {
    let masked_items = batch
        .iter()
        .filter(|it| !it.plan.masked_indices.is_empty())
        .count();
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (i, it) in batch.iter().enumerate() {
        if it.target.k() != fw.k || it.target.padded_len() != p.dims.input_len {
            return Err(Error::DimensionMismatch(
                "reconstruction target does not match input".into(),
            ));
        }
        let m = it.plan.masked_indices.len();
        for &t in &it.plan.masked_indices {
            if t >= fw.k {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: fw.k,
                });
            }
            let len = it.target.true_lengths[t].max(1);
            rows.push((i, t));
            weights.push(1.0 / (masked_items as f64 * m as f64 * len as f64));
        }
    }
    let two_h = 2 * p.dims.hidden;
    let mut features = Array2::<f64>::zeros((rows.len(), two_h));
    for (r, &(i, t)) in rows.iter().enumerate() {
        features.row_mut(r).assign(&fw.position_feature(i, t));
    }
    let mut residual = features.dot(&p.recon_w.t());
    residual += &p.recon_b;
    let mut loss = 0.0;
    for (r, &(i, t)) in rows.iter().enumerate() {
        let len = batch[i].target.true_lengths[t];
        let target = batch[i].target.tokens.row(t);
        let mut row = residual.row_mut(r);
        let mut sq = 0.0;
        for j in 0..row.len() {
            if j < len {
                row[j] -= target[j];
                sq += row[j] * row[j];
            } else {
                row[j] = 0.0;
            }
        }
        loss += weights[r] * sq;
    }
    Ok(Reconstruction {
        rows,
        weights,
        features,
        residual,
        loss,
    })
}

fn classification_loss(
    p: &EncoderParams,
    fw: &Forward,
    batch: &[BatchItem<'_>],
) -> Result<(f64, Array2<f64>)> {
    let c = p.dims.classes;
    let mut probs = Array2::<f64>::zeros((fw.b, c));
    let mut loss = 0.0;
    for (i, it) in batch.iter().enumerate() {
        if it.label >= c {
            return Err(Error::LabelOutOfRange {
                label: it.label,
                classes: c,
            });
        }
        let logits = fw.logits.row(i).to_vec();
        let (pr, ce) = softmax_cross_entropy(&logits, it.label);
        probs.row_mut(i).assign(&Array1::from(pr));
        loss += ce;
    }
    Ok((loss / fw.b as f64, probs))
}

fn inputs_of<'a>(batch: &[BatchItem<'a>]) -> Vec<&'a ComponentSequence> {
    batch.iter().map(|it| it.input).collect()
}

/// Losses of a batch without gradients.
pub fn batch_loss(
    p: &EncoderParams,
    batch: &[BatchItem<'_>],
    lambdas: (f64, f64),
) -> Result<LossReport> {
    let fw = forward(p, &inputs_of(batch))?;
    let rec = reconstruct(p, &fw, batch)?;
    let (ce, _) = classification_loss(p, &fw, batch)?;
    Ok(LossReport::new(rec.loss, ce, lambdas))
}

/// Losses of a batch plus the exact gradient of
/// `lambda1 * mae + lambda2 * ce` with respect to every parameter.
pub fn loss_and_gradients(
    p: &EncoderParams,
    batch: &[BatchItem<'_>],
    lambdas: (f64, f64),
) -> Result<(LossReport, EncoderParams)> {
    let (lambda1, lambda2) = lambdas;
    let fw = forward(p, &inputs_of(batch))?;
    let rec = reconstruct(p, &fw, batch)?;
    let (ce, probs) = classification_loss(p, &fw, batch)?;
    let report = LossReport::new(rec.loss, ce, lambdas);

    let dims = p.dims;
    let (k, b, h) = (fw.k, fw.b, dims.hidden);
    let mut g = EncoderParams::zeros(dims);
    let mut dh_f = vec![Array2::<f64>::zeros((b, h)); k];
    let mut dh_b = vec![Array2::<f64>::zeros((b, h)); k];

    // reconstruction head
    if !rec.rows.is_empty() {
        let mut d_r = rec.residual.clone();
        for (r, mut row) in d_r.rows_mut().into_iter().enumerate() {
            let w = 2.0 * lambda1 * rec.weights[r];
            row.mapv_inplace(|v| v * w);
        }
        general_mat_mul(1.0, &d_r.t(), &rec.features, 0.0, &mut g.recon_w);
        g.recon_b = d_r.sum_axis(Axis(0));
        let d_feat = d_r.dot(&p.recon_w);
        for (r, &(i, t)) in rec.rows.iter().enumerate() {
            let row = d_feat.row(r);
            let mut f = dh_f[t].row_mut(i);
            f += &row.slice(s![..h]);
            let mut bb = dh_b[t].row_mut(i);
            bb += &row.slice(s![h..]);
        }
    }

    // classifier head and dense layer
    let mut d_logits = probs;
    for (i, it) in batch.iter().enumerate() {
        d_logits[[i, it.label]] -= 1.0;
    }
    d_logits.mapv_inplace(|v| v * lambda2 / b as f64);
    general_mat_mul(1.0, &d_logits.t(), &fw.dense_out, 0.0, &mut g.class_w);
    g.class_b = d_logits.sum_axis(Axis(0));
    let mut d_dense = d_logits.dot(&p.class_w);
    ndarray::Zip::from(&mut d_dense)
        .and(&fw.dense_pre)
        .for_each(|d, &pre| {
            if pre <= 0.0 {
                *d = 0.0;
            }
        });
    general_mat_mul(1.0, &d_dense.t(), &fw.q, 0.0, &mut g.dense_w);
    g.dense_b = d_dense.sum_axis(Axis(0));
    let d_q = d_dense.dot(&p.dense_w);
    dh_f[k - 1] += &d_q.slice(s![.., ..h]);
    dh_b[0] += &d_q.slice(s![.., h..]);

    backprop_direction(&p.fwd, &fw.fwd, &fw.x, &dh_f, k, b, false, &mut g.fwd);
    backprop_direction(&p.bwd, &fw.bwd, &fw.x, &dh_b, k, b, true, &mut g.bwd);
    Ok((report, g))
}

/// Classification feature and per-position hidden states of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    /// Dense-layer output, length `D`.
    pub feature: Array1<f64>,
    /// `(K, 2H)` concatenated forward/backward states.
    pub positions: Array2<f64>,
}

pub fn forward_features(p: &EncoderParams, cs: &ComponentSequence) -> Result<Features> {
    let fw = forward(p, &[cs])?;
    Ok(Features {
        feature: fw.dense_out.row(0).to_owned(),
        positions: fw.position_features(0),
    })
}

/// Dense features of many sequences, `(n, D)`.
pub fn features_batch(p: &EncoderParams, seqs: &[&ComponentSequence]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((seqs.len(), p.dims.dense));
    for (chunk_idx, chunk) in seqs.chunks(64).enumerate() {
        let fw = forward(p, chunk)?;
        out.slice_mut(s![chunk_idx * 64..chunk_idx * 64 + chunk.len(), ..])
            .assign(&fw.dense_out);
    }
    Ok(out)
}

/// Reconstruction loss of one masked sequence; padding is excluded.
pub fn mae_loss(
    p: &EncoderParams,
    masked: &ComponentSequence,
    targets: &ComponentSequence,
    plan: &MaskPlan,
) -> Result<f64> {
    let fw = forward(p, &[masked])?;
    let item = BatchItem {
        input: masked,
        target: targets,
        plan,
        label: 0,
    };
    Ok(reconstruct(p, &fw, &[item])?.loss)
}

fn logits_of(p: &EncoderParams, feature: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut logits = feature.dot(&p.class_w.t());
    logits += &p.class_b;
    logits
}

/// Softmax cross-entropy of the classifier head on a dense feature.
pub fn ce_loss(p: &EncoderParams, feature: &Array1<f64>, label: usize) -> Result<f64> {
    if label >= p.dims.classes {
        return Err(Error::LabelOutOfRange {
            label,
            classes: p.dims.classes,
        });
    }
    if feature.len() != p.dims.dense {
        return Err(Error::DimensionMismatch(format!(
            "feature has {} entries, expected {}",
            feature.len(),
            p.dims.dense
        )));
    }
    let logits = logits_of(p, feature.view().insert_axis(Axis(0)));
    Ok(softmax_cross_entropy(logits.row(0).as_slice().expect("row"), label).1)
}

fn argmax_lowest(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in probs.iter().enumerate() {
        if v > probs[best] {
            best = i;
        }
    }
    best
}

/// Predicted class (ties to the lowest index) and class probabilities.
pub fn classify(p: &EncoderParams, cs: &ComponentSequence) -> Result<(usize, Vec<f64>)> {
    let fw = forward(p, &[cs])?;
    let (probs, _) = softmax_cross_entropy(fw.logits.row(0).as_slice().expect("row"), 0);
    Ok((argmax_lowest(&probs), probs))
}

/// Predicted classes for many sequences.
pub fn classify_batch(p: &EncoderParams, seqs: &[&ComponentSequence]) -> Result<Vec<usize>> {
    let feats = features_batch(p, seqs)?;
    let logits = logits_of(p, feats.view());
    Ok(logits
        .rows()
        .into_iter()
        .map(|row| {
            let (probs, _) = softmax_cross_entropy(row.as_slice().expect("row"), 0);
            argmax_lowest(&probs)
        })
        .collect())
}
