// SPDX-License-Identifier: MIT OR Apache-2.0

//! Segmentation covering, classification accuracy and summary statistics.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::series::SegmentBoundaries;

/// A predicted segmentation scored against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub predicted: SegmentBoundaries,
    pub ground_truth: SegmentBoundaries,
    pub covering: f64,
}

impl SegmentationResult {
    pub fn new(predicted: SegmentBoundaries, ground_truth: SegmentBoundaries) -> Result<Self> {
        let covering = covering_score(&ground_truth, &predicted, ground_truth.series_len())?;
        Ok(Self {
            predicted,
            ground_truth,
            covering,
        })
    }
}

/// Length-weighted best Jaccard overlap of every ground-truth segment with
/// any predicted segment. Not symmetric in its arguments.
pub fn covering_score(gt: &SegmentBoundaries, pred: &SegmentBoundaries, n: usize) -> Result<f64> {
    for (which, b) in [("ground truth", gt), ("prediction", pred)] {
        if b.series_len() != n {
            return Err(Error::PartitionMismatch {
                len: n,
                reason: format!("{which} tiles [0, {}) instead", b.series_len()),
            });
        }
    }
    if n == 0 {
        return Err(Error::PartitionMismatch {
            len: 0,
            reason: "empty series".into(),
        });
    }
    let pred_segs = pred.segments();
    let mut total = 0.0;
    for (a0, a1) in gt.segments() {
        // predicted segments are sorted; only those overlapping [a0, a1) can score
        let first = pred_segs.partition_point(|&(_, e)| e <= a0);
        let best = pred_segs[first..]
            .iter()
            .take_while(|&&(s, _)| s < a1)
            .map(|&(b0, b1)| {
                let inter = a1.min(b1) - a0.max(b0);
                let union = a1.max(b1) - a0.min(b0);
                inter as f64 / union as f64
            })
            .fold(0.0, f64::max);
        total += (a1 - a0) as f64 * best;
    }
    Ok(total / n as f64)
}

/// Fraction of positions where `preds` and `labels` agree.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty);
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Sorted by name.
    pub table: Vec<(String, f64)>,
}

pub fn summarize(per_dataset: &[(String, f64)]) -> Result<Summary> {
    if per_dataset.is_empty() {
        return Err(Error::Empty);
    }
    let n = per_dataset.len() as f64;
    let mean = per_dataset.iter().map(|(_, v)| v).sum::<f64>() / n;
    let var = per_dataset
        .iter()
        .map(|(_, v)| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let mut table = per_dataset.to_vec();
    table.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Summary {
        mean,
        std: var.sqrt(),
        table,
    })
}

/// Classifier assigning each row to the class with the closest mean feature.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    /// `(C, D)`; rows of classes absent from training are `None`.
    centroids: Vec<Option<Vec<f64>>>,
}

impl NearestCentroid {
    pub fn fit(features: ArrayView2<'_, f64>, labels: &[usize], classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        let mut sums = Array2::<f64>::zeros((classes, features.ncols()));
        let mut counts = vec![0usize; classes];
        for (row, &l) in features.rows().into_iter().zip(labels) {
            if l >= classes {
                return Err(Error::LabelOutOfRange { label: l, classes });
            }
            let mut s = sums.row_mut(l);
            s += &row;
            counts[l] += 1;
        }
        let centroids = sums
            .rows()
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s.iter().map(|v| v / c as f64).collect()))
            .collect();
        Ok(Self { centroids })
    }

    /// Closest centroid per row; ties go to the lowest class index.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Vec<usize> {
        features
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = (f64::INFINITY, 0);
                for (c, centroid) in self.centroids.iter().enumerate() {
                    let Some(centroid) = centroid else { continue };
                    let d: f64 = row
                        .iter()
                        .zip(centroid)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect()
    }
}

/// One-feature threshold rule for two classes: predicts `upper_class` when
/// the statistic exceeds `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdClassifier {
    pub threshold: f64,
    pub upper_class: usize,
}

impl ThresholdClassifier {
    /// Threshold and orientation with the best training accuracy; candidate
    /// thresholds are midpoints between consecutive sorted values.
    pub fn fit(values: &[f64], labels: &[usize]) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: labels.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: 2,
            });
        }
        let mut pairs: Vec<(f64, usize)> =
            values.iter().copied().zip(labels.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ones = labels.iter().filter(|&&l| l == 1).count();
        // sweep the cut position; values at or below the threshold are "below"
        let mut best: Option<(f64, usize, usize)> = None;
        let mut ones_below = 0usize;
        let n = pairs.len();
        for j in 0..=n {
            if j > 0 && j < n && pairs[j - 1].0 == pairs[j].0 {
                ones_below += usize::from(pairs[j - 1].1 == 1);
                continue;
            }
            let thr = match j {
                0 => f64::NEG_INFINITY,
                _ if j == n => pairs[n - 1].0,
                _ => 0.5 * (pairs[j - 1].0 + pairs[j].0),
            };
            if j > 0 {
                ones_below += usize::from(pairs[j - 1].1 == 1);
            }
            let zeros_below = j - ones_below;
            let upper_one = zeros_below + (ones - ones_below);
            let upper_zero = n - upper_one;
            for (hits, upper) in [(upper_one, 1), (upper_zero, 0)] {
                if best.is_none_or(|b| hits > b.2) {
                    best = Some((thr, upper, hits));
                }
            }
        }
        let (threshold, upper_class, _) = best.expect("at least one candidate");
        Ok(Self {
            threshold,
            upper_class,
        })
    }

    pub fn predict(&self, value: f64) -> usize {
        if value > self.threshold {
            self.upper_class
        } else {
            1 - self.upper_class
        }
    }
}
