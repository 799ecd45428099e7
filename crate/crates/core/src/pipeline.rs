// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end segmentation and classification runs.

use crate::change_space::{segment_by_saliency, segment_series, select_segment_count};
use crate::config::{ExperimentConfig, Normalize};
use crate::encoder::{
    classify_batch, derive_seed, features_batch, train, Checkpoint, EncoderDims, LabeledSequence,
    TrainOutcome,
};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, covering_score, summarize, NearestCentroid, Summary};
use crate::ingestion::split_indices;
use crate::series::{ComponentSequence, SegmentBoundaries, TimeSeries};
use crate::tokenizer::{padded_length, tokenize};

const STREAM_SPLIT: u64 = 0x5350_4c54;

pub fn preprocess(series: &[TimeSeries], normalize: Normalize) -> Vec<TimeSeries> {
    match normalize {
        Normalize::ZScore => series.iter().map(TimeSeries::z_normalized).collect(),
        Normalize::None => series.to_vec(),
    }
}

/// Boundaries for one series; `k = None` uses every salient peak.
pub fn segment_one(
    s: &TimeSeries,
    k: Option<usize>,
    cfg: &ExperimentConfig,
) -> Result<SegmentBoundaries> {
    match k {
        Some(k) => segment_series(s, k, &cfg.change_space),
        None => segment_by_saliency(s, &cfg.change_space),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSegmentation {
    pub id: String,
    pub boundaries: SegmentBoundaries,
    pub covering: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationRun {
    pub series: Vec<SeriesSegmentation>,
    /// Present when ground truth was supplied.
    pub covering: Option<Summary>,
}

/// Segments every series, scoring against `truth` when given. A fixed segment
/// count comes from `k`, else from the config; without either the window-free
/// rule applies.
pub fn run_segmentation(
    series: &[TimeSeries],
    truth: Option<&[SegmentBoundaries]>,
    k: Option<usize>,
    cfg: &ExperimentConfig,
) -> Result<SegmentationRun> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.len() != series.len() {
            return Err(Error::LengthMismatch {
                left: series.len(),
                right: t.len(),
            });
        }
    }
    let k = k.or(cfg.segment_count);
    let prepared = preprocess(series, cfg.normalize);
    let mut out = Vec::with_capacity(series.len());
    for (i, s) in prepared.iter().enumerate() {
        let boundaries = segment_one(s, k, cfg)?;
        let covering = match truth {
            Some(t) => Some(covering_score(&t[i], &boundaries, s.len())?),
            None => None,
        };
        out.push(SeriesSegmentation {
            id: s.id.clone(),
            boundaries,
            covering,
        });
    }
    let covering = match truth {
        Some(_) => Some(summarize(
            &out.iter()
                .map(|r| (r.id.clone(), r.covering.expect("scored")))
                .collect::<Vec<_>>(),
        )?),
        None => None,
    };
    Ok(SegmentationRun {
        series: out,
        covering,
    })
}

#[derive(Debug, Clone)]
pub struct ClassificationRun {
    pub segment_count: usize,
    pub padded_len: usize,
    pub dims: EncoderDims,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub outcome: TrainOutcome,
    /// Classifier-head accuracy on the test set.
    pub test_accuracy: f64,
    /// Accuracy of a nearest-centroid probe fitted on training features.
    pub probe_accuracy: f64,
    pub test_predictions: Vec<usize>,
    pub checkpoint: Checkpoint,
}

fn labels_of(series: &[TimeSeries]) -> Result<Vec<usize>> {
    series
        .iter()
        .enumerate()
        .map(|(i, s)| s.label.ok_or(Error::MissingLabel { index: i }))
        .collect()
}

/// Selects the segment count on the training set, tokenizes both splits with a
/// shared padded length, holds out a stratified validation split, trains, and
/// scores the test set.
pub fn run_classification(
    train_series: &[TimeSeries],
    test_series: &[TimeSeries],
    cfg: &ExperimentConfig,
) -> Result<ClassificationRun> {
    cfg.validate()?;
    if train_series.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let train_labels = labels_of(train_series)?;
    let test_labels = labels_of(test_series)?;
    let classes = train_labels
        .iter()
        .chain(&test_labels)
        .max()
        .map_or(0, |m| m + 1)
        .max(2);

    let train_p = preprocess(train_series, cfg.normalize);
    let test_p = preprocess(test_series, cfg.normalize);
    let k = match cfg.segment_count {
        Some(k) => k,
        None => select_segment_count(&train_p, &cfg.change_space)?,
    };
    let segment_all = |xs: &[TimeSeries]| -> Result<Vec<SegmentBoundaries>> {
        xs.iter()
            .map(|s| segment_series(s, k, &cfg.change_space))
            .collect()
    };
    let train_b = segment_all(&train_p)?;
    let test_b = segment_all(&test_p)?;
    let padded_len = padded_length(train_b.iter().chain(&test_b));
    let tokens = |xs: &[TimeSeries], bs: &[SegmentBoundaries]| -> Result<Vec<ComponentSequence>> {
        xs.iter()
            .zip(bs)
            .map(|(s, b)| tokenize(s, b, padded_len))
            .collect()
    };
    let train_t = tokens(&train_p, &train_b)?;
    let test_t = tokens(&test_p, &test_b)?;

    let labels: Vec<Option<usize>> = train_labels.iter().map(|&l| Some(l)).collect();
    let (tr_idx, va_idx) = if train_t.len() >= 2 {
        split_indices(
            &labels,
            cfg.val_fraction,
            derive_seed(cfg.train.seed, STREAM_SPLIT, 0),
        )?
    } else {
        ((0..train_t.len()).collect(), Vec::new())
    };
    let labeled = |idx: &[usize]| -> Vec<LabeledSequence> {
        idx.iter()
            .map(|&i| LabeledSequence {
                tokens: train_t[i].clone(),
                label: train_labels[i],
            })
            .collect()
    };
    let tr = labeled(&tr_idx);
    let va = labeled(&va_idx);

    let dims = EncoderDims {
        input_len: padded_len,
        hidden: cfg.encoder.hidden_size,
        dense: cfg.encoder.dense_size,
        classes,
    };
    let outcome = train(&tr, &va, dims, &cfg.train, &cfg.schedule, cfg.mask_ratio)?;

    let test_refs: Vec<&ComponentSequence> = test_t.iter().collect();
    let (test_predictions, test_accuracy, probe_accuracy) = if test_refs.is_empty() {
        (Vec::new(), f64::NAN, f64::NAN)
    } else {
        let preds = classify_batch(&outcome.params, &test_refs)?;
        let acc = accuracy(&preds, &test_labels)?;
        let train_refs: Vec<&ComponentSequence> = tr.iter().map(|s| &s.tokens).collect();
        let train_feats = features_batch(&outcome.params, &train_refs)?;
        let tr_labels: Vec<usize> = tr.iter().map(|s| s.label).collect();
        let probe = NearestCentroid::fit(train_feats.view(), &tr_labels, classes)?;
        let test_feats = features_batch(&outcome.params, &test_refs)?;
        let probe_acc = accuracy(&probe.predict(test_feats.view()), &test_labels)?;
        (preds, acc, probe_acc)
    };

    let mut metadata: std::collections::BTreeMap<String, String> = cfg
        .entries()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    metadata.insert("resolved_segment_count".into(), k.to_string());
    metadata.insert("best_epoch".into(), outcome.best_epoch.to_string());
    let checkpoint = Checkpoint {
        params: outcome.params.clone(),
        seed: cfg.train.seed,
        metadata,
    };
    Ok(ClassificationRun {
        segment_count: k,
        padded_len,
        dims,
        train_size: tr.len(),
        val_size: va.len(),
        test_size: test_t.len(),
        outcome,
        test_accuracy,
        probe_accuracy,
        test_predictions,
        checkpoint,
    })
}
