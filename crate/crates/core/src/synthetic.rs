// SPDX-License-Identifier: MIT OR Apache-2.0

//! Piecewise-stationary Gaussian series with known boundaries and classes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::series::{SegmentBoundaries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub len: usize,
    pub mean: f64,
    pub std: f64,
}

impl SegmentSpec {
    pub fn new(len: usize, mean: f64, std: f64) -> Self {
        Self { len, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub segments: Vec<SegmentSpec>,
    pub seed: u64,
    pub label: Option<usize>,
    /// Each interior boundary moves by a uniform integer offset in
    /// `[-jitter, jitter]`; the total length is unchanged.
    pub jitter: usize,
}

impl SyntheticSpec {
    pub fn new(segments: Vec<SegmentSpec>, seed: u64) -> Self {
        Self {
            segments,
            seed,
            label: None,
            jitter: 0,
        }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::config("segments", "at least one segment required"));
        }
        for s in &self.segments {
            if s.len < 2 {
                return Err(Error::config("segments", "segment lengths must be >= 2"));
            }
            if !(s.std >= 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(Error::config(
                    "segments",
                    "means must be finite and stds >= 0",
                ));
            }
        }
        for w in self.segments.windows(2) {
            if self.jitter + 2 > w[0].len || self.jitter + 2 > w[1].len {
                return Err(Error::config(
                    "jitter",
                    "jitter would leave a segment shorter than 2",
                ));
            }
        }
        Ok(())
    }
}

/// A generated series and its true boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub series: TimeSeries,
    pub truth: SegmentBoundaries,
}

pub fn generate(spec: &SyntheticSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cuts = Vec::with_capacity(spec.segments.len() - 1);
    let mut pos = 0usize;
    for s in &spec.segments[..spec.segments.len() - 1] {
        pos += s.len;
        let j = spec.jitter as i64;
        let offset = if j > 0 { rng.gen_range(-j..=j) } else { 0 };
        cuts.push((pos as i64 + offset) as usize);
    }
    let n = spec.total_len();
    let mut values = Vec::with_capacity(n);
    let mut start = 0;
    for (i, s) in spec.segments.iter().enumerate() {
        let end = cuts.get(i).copied().unwrap_or(n);
        let normal = Normal::new(s.mean, s.std).expect("validated std");
        values.extend((start..end).map(|_| normal.sample(&mut rng)));
        start = end;
    }
    let id = format!("synthetic-{}", spec.seed);
    Ok(Generated {
        series: TimeSeries::new(values, spec.label, id)?,
        truth: SegmentBoundaries::new(cuts, n)?,
    })
}

/// Two segments of `len` samples each, the second shifted by `jump` standard
/// deviations.
pub fn mean_shift(len: usize, jump: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec::new(
        vec![
            SegmentSpec::new(len, 0.0, 1.0),
            SegmentSpec::new(len, jump, 1.0),
        ],
        seed,
    )
}

/// Two zero-mean segments of `len` samples with standard deviations 1 and 3.
pub fn variance_shift(len: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec::new(
        vec![
            SegmentSpec::new(len, 0.0, 1.0),
            SegmentSpec::new(len, 0.0, 3.0),
        ],
        seed,
    )
}

/// Per-class segment means of the order-sensitive suite.
pub const SUITE_CLASS_MEANS: [[f64; 3]; 2] = [[0.0, 4.0, 0.0], [4.0, 0.0, 4.0]];
pub const SUITE_SEGMENT_LEN: usize = 200;
pub const SUITE_JITTER: usize = 20;
pub const SUITE_SPLIT_SIZE: usize = 100;

/// Balanced two-class train and test sets whose classes differ in the order of
/// their components.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSuite {
    pub train: Vec<Generated>,
    pub test: Vec<Generated>,
}

impl ClassificationSuite {
    pub fn train_series(&self) -> Vec<TimeSeries> {
        self.train.iter().map(|g| g.series.clone()).collect()
    }

    pub fn test_series(&self) -> Vec<TimeSeries> {
        self.test.iter().map(|g| g.series.clone()).collect()
    }
}

pub fn suite_spec(label: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        segments: SUITE_CLASS_MEANS[label]
            .iter()
            .map(|&m| SegmentSpec::new(SUITE_SEGMENT_LEN, m, 1.0))
            .collect(),
        seed,
        label: Some(label),
        jitter: SUITE_JITTER,
    }
}

pub fn make_classification_suite(seed: u64) -> ClassificationSuite {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |name: &str| -> Vec<Generated> {
        (0..SUITE_SPLIT_SIZE)
            .map(|i| {
                let mut g = generate(&suite_spec(i % 2, seeds.gen())).expect("fixed spec is valid");
                g.series.id = format!("{name}-{i}");
                g
            })
            .collect()
    };
    let train = split("train");
    let test = split("test");
    ClassificationSuite { train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_segments() {
        let g = generate(&mean_shift(200, 5.0, 1)).unwrap();
        assert_eq!(g.series.len(), 400);
        assert_eq!(g.truth.cuts(), &[200]);
        let left: f64 = g.series.values[..200].iter().sum::<f64>() / 200.0;
        let right: f64 = g.series.values[200..].iter().sum::<f64>() / 200.0;
        assert!(left.abs() < 0.3 && (right - 5.0).abs() < 0.3);
    }

    #[test]
    fn zero_std_is_piecewise_constant() {
        let spec = SyntheticSpec::new(
            vec![
                SegmentSpec::new(3, 1.0, 0.0),
                SegmentSpec::new(4, -2.0, 0.0),
            ],
            0,
        );
        let g = generate(&spec).unwrap();
        assert_eq!(g.series.values, vec![1.0, 1.0, 1.0, -2.0, -2.0, -2.0, -2.0]);
    }

    #[test]
    fn seeded() {
        let a = generate(&variance_shift(50, 3)).unwrap();
        assert_eq!(a, generate(&variance_shift(50, 3)).unwrap());
        assert_ne!(a, generate(&variance_shift(50, 4)).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let short = SyntheticSpec::new(vec![SegmentSpec::new(1, 0.0, 1.0)], 0);
        assert!(generate(&short).is_err());
        let neg = SyntheticSpec::new(vec![SegmentSpec::new(5, 0.0, -1.0)], 0);
        assert!(generate(&neg).is_err());
        let mut jit = mean_shift(10, 1.0, 0);
        jit.jitter = 9;
        assert!(generate(&jit).is_err());
    }

    #[test]
    fn jitter_bound_and_length() {
        for seed in 0..200 {
            let g = generate(&suite_spec((seed % 2) as usize, seed)).unwrap();
            assert_eq!(g.series.len(), 600);
            let c = g.truth.cuts();
            assert!(
                (180..=220).contains(&c[0]) && (380..=420).contains(&c[1]),
                "{c:?}"
            );
        }
    }
}
