// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared domain types: series, boundaries and tokenized component sequences.
//!
//! Indices are 0-based and intervals half-open everywhere.

use ndarray::Array2;

use crate::error::{Error, Result};

/// One univariate series with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub label: Option<usize>,
    pub id: String,
}

impl TimeSeries {
    /// Builds a validated series.
    pub fn new(values: Vec<f64>, label: Option<usize>, id: impl Into<String>) -> Result<Self> {
        validate_series(TimeSeries {
            values,
            label,
            id: id.into(),
        })
    }

    pub fn unlabeled(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None, "")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-series z-normalization with population standard deviation.
    /// Constant series map to all zeros.
    pub fn z_normalized(&self) -> TimeSeries {
        TimeSeries {
            values: z_normalize_values(&self.values),
            label: self.label,
            id: self.id.clone(),
        }
    }
}

/// Returns the series unchanged if every invariant holds.
pub fn validate_series(s: TimeSeries) -> Result<TimeSeries> {
    if let Some(i) = s.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if s.values.len() < 2 {
        return Err(Error::TooShort {
            len: s.values.len(),
        });
    }
    Ok(s)
}

pub(crate) fn z_normalize_values(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Relative threshold so that a constant series with rounding noise in the
    // mean still counts as constant.
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if std <= 1e-12 * scale.max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Ordered interior cut indices partitioning `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentBoundaries {
    cuts: Vec<usize>,
    len: usize,
}

impl SegmentBoundaries {
    /// `cuts` must be strictly increasing and lie in `(0, len)`.
    pub fn new(cuts: Vec<usize>, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::PartitionMismatch {
                len,
                reason: "empty series".into(),
            });
        }
        let mut prev = 0;
        for &c in &cuts {
            if c <= prev || c >= len {
                return Err(Error::PartitionMismatch {
                    len,
                    reason: format!("cut {c} breaks 0 < c_1 < ... < c_m < {len}"),
                });
            }
            prev = c;
        }
        Ok(Self { cuts, len })
    }

    /// A single segment covering the whole series.
    pub fn whole(len: usize) -> Result<Self> {
        Self::new(Vec::new(), len)
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn segment_count(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Half-open `(start, end)` pairs.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.cuts.len() + 1);
        let mut start = 0;
        for &c in &self.cuts {
            out.push((start, c));
            start = c;
        }
        out.push((start, self.len));
        out
    }

    pub fn max_segment_len(&self) -> usize {
        self.segments()
            .iter()
            .map(|(a, b)| b - a)
            .max()
            .unwrap_or(0)
    }
}

/// K component tokens, each right-padded with zeros to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSequence {
    /// Shape `(K, L)`.
    pub tokens: Array2<f64>,
    pub true_lengths: Vec<usize>,
}

impl ComponentSequence {
    pub fn k(&self) -> usize {
        self.tokens.nrows()
    }

    pub fn padded_len(&self) -> usize {
        self.tokens.ncols()
    }

    /// Unpadded samples of token `i`.
    pub fn token(&self, i: usize) -> Vec<f64> {
        self.tokens
            .row(i)
            .iter()
            .take(self.true_lengths[i])
            .copied()
            .collect()
    }

    /// Concatenation of the unpadded tokens.
    pub fn concat(&self) -> Vec<f64> {
        (0..self.k()).flat_map(|i| self.token(i)).collect()
    }
}
