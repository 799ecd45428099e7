// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{batch_loss, classify_batch, loss_and_gradients, BatchItem, LossReport};
use super::optim::{clip_grad_norm, Adam};
use super::params::{EncoderDims, EncoderParams};
use crate::config::{LossSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::series::ComponentSequence;
use crate::tokenizer::{apply_mask, plan_mask, MaskPlan};

const STREAM_INIT: u64 = 0x494e_4954;
const STREAM_SHUFFLE: u64 = 0x5348_5546;
const STREAM_MASK: u64 = 0x4d41_534b;
const STREAM_VAL: u64 = 0x5641_4c49;

/// Mixes a base seed with two indices (splitmix64 finalizer).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub tokens: ComponentSequence,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mae_loss: f64,
    pub ce_loss: f64,
    pub total: f64,
    pub val_mae: f64,
    pub val_ce: f64,
    pub val_total: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch in the final loss phase.
    pub params: EncoderParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct Masked {
    input: ComponentSequence,
    plan: MaskPlan,
}

fn masked_copy(cs: &ComponentSequence, ratio: f64, seed: u64) -> Result<Masked> {
    let plan = plan_mask(cs.k(), ratio, seed);
    Ok(Masked {
        input: apply_mask(cs, &plan)?,
        plan,
    })
}

/// Item-weighted mean of batch losses over `data` with the given masks.
fn dataset_loss(
    params: &EncoderParams,
    data: &[LabeledSequence],
    masks: &[Masked],
    lambdas: (f64, f64),
) -> Result<LossReport> {
    let (mut mae, mut ce) = (0.0, 0.0);
    let chunk = 64;
    for (start, part) in data.chunks(chunk).enumerate().map(|(i, p)| (i * chunk, p)) {
        let items: Vec<BatchItem<'_>> = part
            .iter()
            .enumerate()
            .map(|(j, s)| BatchItem {
                input: &masks[start + j].input,
                target: &s.tokens,
                plan: &masks[start + j].plan,
                label: s.label,
            })
            .collect();
        let r = batch_loss(params, &items, lambdas)?;
        mae += r.mae_loss * part.len() as f64;
        ce += r.ce_loss * part.len() as f64;
    }
    let n = data.len() as f64;
    let (mae, ce) = (mae / n, ce / n);
    Ok(LossReport {
        mae_loss: mae,
        ce_loss: ce,
        total: lambdas.0 * mae + lambdas.1 * ce,
        lambda1: lambdas.0,
        lambda2: lambdas.1,
    })
}

/// Fraction of `data` the encoder classifies correctly.
pub fn accuracy_on(params: &EncoderParams, data: &[LabeledSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty);
    }
    let seqs: Vec<&ComponentSequence> = data.iter().map(|s| &s.tokens).collect();
    let preds = classify_batch(params, &seqs)?;
    let hits = preds
        .iter()
        .zip(data)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

fn check_dataset(data: &[LabeledSequence], dims: &EncoderDims) -> Result<usize> {
    let k = data.first().ok_or(Error::EmptyTrainingSet)?.tokens.k();
    if k < 2 {
        return Err(Error::DimensionMismatch(
            "masked training needs at least 2 tokens per sequence".into(),
        ));
    }
    for s in data {
        if s.tokens.k() != k || s.tokens.padded_len() != dims.input_len {
            return Err(Error::DimensionMismatch(format!(
                "sequence shape ({}, {}) differs from ({}, {})",
                s.tokens.k(),
                s.tokens.padded_len(),
                k,
                dims.input_len
            )));
        }
        if s.label >= dims.classes {
            return Err(Error::LabelOutOfRange {
                label: s.label,
                classes: dims.classes,
            });
        }
    }
    Ok(k)
}

/// Trains a fresh encoder.
///
/// Masks are redrawn for every item every epoch from `(seed, epoch, item)`;
/// validation masks are fixed for the whole run so validation losses are
/// comparable across epochs. Early stopping watches the validation total loss
/// and only fires in the schedule's final phase.
pub fn train(
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    dims: EncoderDims,
    cfg: &TrainConfig,
    schedule: &LossSchedule,
    mask_ratio: f64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    schedule.validate()?;
    check_dataset(train_set, &dims)?;
    if !val_set.is_empty() {
        check_dataset(val_set, &dims)?;
    }
    let params = EncoderParams::init(dims, derive_seed(cfg.seed, STREAM_INIT, 0));
    train_from(params, train_set, val_set, cfg, schedule, mask_ratio)
}

/// Continues training from `params`.
pub fn train_from(
    mut params: EncoderParams,
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    cfg: &TrainConfig,
    schedule: &LossSchedule,
    mask_ratio: f64,
) -> Result<TrainOutcome> {
    let mut opt = Adam::new(&params, cfg);
    let val_masks = val_set
        .iter()
        .enumerate()
        .map(|(i, s)| {
            masked_copy(
                &s.tokens,
                mask_ratio,
                derive_seed(cfg.seed, STREAM_VAL, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let final_phase = schedule.phase(cfg.max_epochs);
    let mut log = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, usize, EncoderParams)> = None; // (loss, epoch, phase, params)
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let lambdas = schedule.lambdas(epoch);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SHUFFLE, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mask_base = derive_seed(cfg.seed, STREAM_MASK, epoch as u64);

        let (mut mae, mut ce) = (0.0, 0.0);
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let masks = chunk
                .iter()
                .map(|&i| {
                    masked_copy(
                        &train_set[i].tokens,
                        mask_ratio,
                        derive_seed(mask_base, i as u64, 0),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let items: Vec<BatchItem<'_>> = chunk
                .iter()
                .zip(&masks)
                .map(|(&i, m)| BatchItem {
                    input: &m.input,
                    target: &train_set[i].tokens,
                    plan: &m.plan,
                    label: train_set[i].label,
                })
                .collect();
            let (report, mut grads) = loss_and_gradients(&params, &items, lambdas)?;
            let norm = clip_grad_norm(&mut grads, cfg.grad_clip);
            if !norm.is_finite() || !report.total.is_finite() {
                return Err(Error::NonFiniteGradient {
                    epoch,
                    batch: batch_idx,
                });
            }
            opt.step(&mut params, &grads);
            mae += report.mae_loss * chunk.len() as f64;
            ce += report.ce_loss * chunk.len() as f64;
        }
        let n = train_set.len() as f64;
        let (mae, ce) = (mae / n, ce / n);
        let total = lambdas.0 * mae + lambdas.1 * ce;

        let (val, val_accuracy) = if val_set.is_empty() {
            let r = LossReport {
                mae_loss: mae,
                ce_loss: ce,
                total,
                lambda1: lambdas.0,
                lambda2: lambdas.1,
            };
            (r, accuracy_on(&params, train_set)?)
        } else {
            (
                dataset_loss(&params, val_set, &val_masks, lambdas)?,
                accuracy_on(&params, val_set)?,
            )
        };
        log.push(EpochLog {
            epoch,
            lambda1: lambdas.0,
            lambda2: lambdas.1,
            mae_loss: mae,
            ce_loss: ce,
            total,
            val_mae: val.mae_loss,
            val_ce: val.ce_loss,
            val_total: val.total,
            val_accuracy,
        });

        let phase = schedule.phase(epoch);
        let improved = match &best {
            Some((loss, _, best_phase, _)) => *best_phase != phase || val.total < *loss,
            None => true,
        };
        if improved {
            best = Some((val.total, epoch, phase, params.clone()));
        }
        let (_, best_epoch, _, _) = best.as_ref().expect("set above");
        if phase == final_phase && epoch - best_epoch >= cfg.patience {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }

    let (_, best_epoch, _, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
        stopped_early,
    })
}
