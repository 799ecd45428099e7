// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use tempcomp::change_space::{segment_by_saliency, series_peaks};
use tempcomp::config::{ChangeSpaceConfig, ExperimentConfig};
use tempcomp::evaluation::covering_score;
use tempcomp::pipeline::run_segmentation;
use tempcomp::synthetic::{generate, make_classification_suite, mean_shift, variance_shift};
use tempcomp::SegmentBoundaries;

// Covering from explicit index sets.
fn brute_covering(gt: &SegmentBoundaries, pred: &SegmentBoundaries, n: usize) -> f64 {
    let sets = |b: &SegmentBoundaries| -> Vec<Vec<bool>> {
        b.segments()
            .into_iter()
            .map(|(s, e)| (0..n).map(|i| s <= i && i < e).collect())
            .collect()
    };
    let (g, p) = (sets(gt), sets(pred));
    let mut total = 0.0;
    for a in &g {
        let size = a.iter().filter(|&&x| x).count();
        let best = p
            .iter()
            .map(|b| {
                let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
                let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
                inter as f64 / union as f64
            })
            .fold(0.0, f64::max);
        total += size as f64 * best;
    }
    total / n as f64
}

fn partition() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2usize..200).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::btree_set(1..n, 0..12).prop_map(|s| s.into_iter().collect()),
            proptest::collection::btree_set(1..n, 0..12).prop_map(|s| s.into_iter().collect()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn covering_matches_index_sets((n, g, p) in partition()) {
        let gt = SegmentBoundaries::new(g, n).unwrap();
        let pred = SegmentBoundaries::new(p, n).unwrap();
        let fast = covering_score(&gt, &pred, n).unwrap();
        prop_assert!((fast - brute_covering(&gt, &pred, n)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&fast));
        prop_assert!(covering_score(&gt, &gt, n).unwrap() >= fast);
    }
}

#[test]
fn mean_and_variance_shifts_are_found() {
    let cfg = ChangeSpaceConfig::default();
    for seed in 0..10 {
        for spec in [mean_shift(200, 3.0, seed), variance_shift(200, seed)] {
            let g = generate(&spec).unwrap();
            let s = g.series.z_normalized();
            let top = series_peaks(&s, &cfg).unwrap().peaks[0].index;
            assert!(top.abs_diff(200) <= 10, "seed {seed}: {top}");
            let b = segment_by_saliency(&s, &cfg).unwrap();
            assert!(covering_score(&g.truth, &b, 400).unwrap() >= 0.9);
        }
    }
}

#[test]
fn pure_noise_yields_few_cuts() {
    let cfg = ChangeSpaceConfig::default();
    let mut total = 0;
    for seed in 0..10 {
        let g = generate(&mean_shift(200, 0.0, seed)).unwrap();
        total += segment_by_saliency(&g.series.z_normalized(), &cfg)
            .unwrap()
            .cuts()
            .len();
    }
    assert!(total <= 40, "{total}");
}

#[test]
fn segmentation_run_scores_against_truth() {
    let gens: Vec<_> = (0..4)
        .map(|s| generate(&mean_shift(150, 4.0, s)).unwrap())
        .collect();
    let series: Vec<_> = gens.iter().map(|g| g.series.clone()).collect();
    let truth: Vec<_> = gens.iter().map(|g| g.truth.clone()).collect();
    let cfg = ExperimentConfig::default();
    let run = run_segmentation(&series, Some(&truth), None, &cfg).unwrap();
    assert!(run.covering.unwrap().mean >= 0.9);
    let fixed = run_segmentation(&series, None, Some(5), &cfg).unwrap();
    assert!(fixed.covering.is_none());
    assert!(fixed
        .series
        .iter()
        .all(|r| r.boundaries.segment_count() == 5));
}

#[test]
fn suite_shape() {
    let suite = make_classification_suite(1);
    assert_eq!((suite.train.len(), suite.test.len()), (100, 100));
    let ones = suite
        .train
        .iter()
        .filter(|g| g.series.label == Some(1))
        .count();
    assert_eq!(ones, 50);
    for g in suite.train.iter().chain(&suite.test) {
        let c = g.truth.cuts();
        assert!((180..=220).contains(&c[0]) && (380..=420).contains(&c[1]));
    }
    assert_eq!(suite, make_classification_suite(1));
}
