// SPDX-License-Identifier: MIT OR Apache-2.0

//! Component tokens and masking plans for the auto-encoding objective.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::{ComponentSequence, SegmentBoundaries, TimeSeries};

pub const DEFAULT_MASK_RATIO: f64 = 0.15;

/// Splits `s` at `b` and right-pads every component with zeros to `padded_len`.
pub fn tokenize(
    s: &TimeSeries,
    b: &SegmentBoundaries,
    padded_len: usize,
) -> Result<ComponentSequence> {
    if b.series_len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "boundaries cover {} samples, series has {}",
            b.series_len(),
            s.len()
        )));
    }
    let segments = b.segments();
    let mut tokens = Array2::zeros((segments.len(), padded_len));
    let mut true_lengths = Vec::with_capacity(segments.len());
    for (i, &(start, end)) in segments.iter().enumerate() {
        let len = end - start;
        if len > padded_len {
            return Err(Error::SegmentTooLong {
                len,
                padded: padded_len,
            });
        }
        for (j, &v) in s.values[start..end].iter().enumerate() {
            tokens[[i, j]] = v;
        }
        true_lengths.push(len);
    }
    Ok(ComponentSequence {
        tokens,
        true_lengths,
    })
}

/// Longest segment over a dataset; the padded token length.
pub fn padded_length<'a>(boundaries: impl IntoIterator<Item = &'a SegmentBoundaries>) -> usize {
    boundaries
        .into_iter()
        .map(SegmentBoundaries::max_segment_len)
        .max()
        .unwrap_or(0)
}

/// Token positions hidden from the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    /// Ascending.
    pub masked_indices: Vec<usize>,
    pub mask_ratio: f64,
}

impl MaskPlan {
    /// An empty plan; only useful for classification-only passes.
    pub fn none() -> Self {
        Self {
            masked_indices: Vec::new(),
            mask_ratio: 0.0,
        }
    }
}

/// Draws `max(1, floor(ratio * k))` positions without replacement.
///
/// For `k >= 3` only interior positions `1..=k-2` are eligible so that every
/// masked token has context on both sides; `k == 2` masks token 0.
pub fn plan_mask(k: usize, ratio: f64, seed: u64) -> MaskPlan {
    assert!(k >= 2, "masking needs at least two tokens");
    let (offset, pool) = if k >= 3 { (1, k - 2) } else { (0, 1) };
    // the epsilon absorbs products like 0.15 * 20 landing just below an integer
    let want = ((ratio * k as f64 + 1e-9).floor() as usize)
        .max(1)
        .min(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masked_indices: Vec<usize> = rand::seq::index::sample(&mut rng, pool, want)
        .into_iter()
        .map(|i| i + offset)
        .collect();
    masked_indices.sort_unstable();
    MaskPlan {
        masked_indices,
        mask_ratio: ratio,
    }
}

/// Copy of `cs` with every masked token replaced by zeros.
pub fn apply_mask(cs: &ComponentSequence, plan: &MaskPlan) -> Result<ComponentSequence> {
    let mut out = cs.clone();
    for &m in &plan.masked_indices {
        if m >= cs.k() {
            return Err(Error::IndexOutOfRange {
                index: m,
                len: cs.k(),
            });
        }
        out.tokens.row_mut(m).fill(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: Vec<f64>) -> TimeSeries {
        TimeSeries::unlabeled(v).unwrap()
    }

    #[test]
    fn tokenize_pads_short_components() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let b = SegmentBoundaries::new(vec![4, 7], 10).unwrap();
        let cs = tokenize(&s(x.clone()), &b, 4).unwrap();
        assert_eq!(cs.k(), 3);
        assert_eq!(cs.true_lengths, vec![4, 3, 3]);
        assert_eq!(cs.tokens.row(1).to_vec(), vec![4.0, 5.0, 6.0, 0.0]);
        assert_eq!(cs.concat(), x);
    }

    #[test]
    fn tokenize_single_component() {
        let x = vec![1.5, -2.0, 0.25];
        let cs = tokenize(&s(x.clone()), &SegmentBoundaries::whole(3).unwrap(), 3).unwrap();
        assert_eq!(cs.k(), 1);
        assert_eq!(cs.tokens.row(0).to_vec(), x);
    }

    #[test]
    fn tokenize_exact_fit() {
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let b = SegmentBoundaries::new(vec![3, 6], 9).unwrap();
        let cs = tokenize(&s(x), &b, 3).unwrap();
        assert_eq!(cs.tokens.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(cs.tokens.row(1).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(cs.tokens.row(2).to_vec(), vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn tokenize_rejects_long_segment() {
        let b = SegmentBoundaries::new(vec![5], 8).unwrap();
        assert_eq!(
            tokenize(&s(vec![0.0; 8]), &b, 4),
            Err(Error::SegmentTooLong { len: 5, padded: 4 })
        );
    }

    #[test]
    fn mask_sizes() {
        assert_eq!(plan_mask(10, 0.15, 1).masked_indices.len(), 1);
        let p = plan_mask(20, 0.15, 1);
        assert_eq!(p.masked_indices.len(), 3);
        assert!(p.masked_indices.iter().all(|&i| (1..=18).contains(&i)));
        for seed in 0..10 {
            assert_eq!(plan_mask(2, 0.9, seed).masked_indices, vec![0]);
        }
        assert_eq!(plan_mask(3, 0.9, 4).masked_indices, vec![1]);
    }

    #[test]
    fn mask_reproducible_and_covering() {
        assert_eq!(plan_mask(20, 0.15, 42), plan_mask(20, 0.15, 42));
        let mut seen = [false; 20];
        for seed in 0..1000 {
            for i in plan_mask(20, 0.15, seed).masked_indices {
                seen[i] = true;
            }
        }
        assert!(!seen[0] && !seen[19]);
        assert!(seen[1..19].iter().all(|&b| b));
    }

    #[test]
    fn apply_mask_zeroes_only_planned_tokens() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let b = SegmentBoundaries::new(vec![2, 4, 6, 8], 10).unwrap();
        let cs = tokenize(&s(x), &b, 2).unwrap();
        let plan = MaskPlan {
            masked_indices: vec![1, 3],
            mask_ratio: 0.4,
        };
        let m = apply_mask(&cs, &plan).unwrap();
        for i in 0..5 {
            if i == 1 || i == 3 {
                assert!(m.tokens.row(i).iter().all(|&v| v == 0.0));
            } else {
                assert_eq!(m.tokens.row(i), cs.tokens.row(i));
            }
        }
        assert_eq!(m.true_lengths, cs.true_lengths);
        assert_eq!(cs.tokens[[1, 0]], 3.0, "input untouched");

        let bad = MaskPlan {
            masked_indices: vec![5],
            mask_ratio: 0.2,
        };
        assert_eq!(
            apply_mask(&cs, &bad),
            Err(Error::IndexOutOfRange { index: 5, len: 5 })
        );
    }

    #[test]
    fn masking_zero_token_is_noop() {
        let b = SegmentBoundaries::new(vec![2, 4], 6).unwrap();
        let cs = tokenize(&s(vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]), &b, 2).unwrap();
        let plan = MaskPlan {
            masked_indices: vec![1],
            mask_ratio: 0.3,
        };
        assert_eq!(apply_mask(&cs, &plan).unwrap(), cs);
    }

    proptest! {
        #[test]
        fn tokenize_roundtrip(
            xs in proptest::collection::vec(-1e6f64..1e6, 2..200),
            raw_cuts in proptest::collection::btree_set(1usize..200, 0..10),
        ) {
            let n = xs.len();
            let cuts: Vec<usize> = raw_cuts.into_iter().filter(|&c| c < n).collect();
            let b = SegmentBoundaries::new(cuts, n).unwrap();
            let l = b.max_segment_len();
            let cs = tokenize(&s(xs.clone()), &b, l).unwrap();
            prop_assert_eq!(cs.concat(), xs);
            for (i, &len) in cs.true_lengths.iter().enumerate() {
                prop_assert!(cs.tokens.row(i).iter().skip(len).all(|&v| v == 0.0));
            }
        }

        #[test]
        fn plan_invariants(k in 2usize..60, ratio in 0.01f64..0.99, seed in any::<u64>()) {
            let p = plan_mask(k, ratio, seed);
            prop_assert!(!p.masked_indices.is_empty());
            prop_assert!(p.masked_indices.len() < k);
            if k >= 3 {
                prop_assert!(p.masked_indices.iter().all(|&i| i > 0 && i < k - 1));
            }
            prop_assert!(p.masked_indices.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
