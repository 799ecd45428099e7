// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multi-scale change space.
//!
//! For a split point `t` and scale `delta`, the change score compares one
//! Gaussian fitted to the pooled window `[t - delta, t + delta)` against two
//! Gaussians fitted to `[t - delta, t)` and `[t, t + delta)`:
//!
//! ```text
//! S(t, delta) = delta * ln(var_pooled)
//!             - delta / 2 * (ln(var_left) + ln(var_right))
//!             - penalty_weight * delta * ln(2 * delta)
//! ```
//!
//! Higher scores mean the two halves are better explained by separate models.
//! Summing `S` over a set of scales gives the multi-scale curve; its smoothed
//! salient peaks are the candidate component boundaries.

use crate::config::ChangeSpaceConfig;
use crate::error::{Error, Result};
use crate::series::{SegmentBoundaries, TimeSeries};

/// Upper bound on the number of components a series is split into.
pub const MAX_SEGMENTS: usize = 50;
/// Segment count used when most training series show no salient change.
pub const FALLBACK_SEGMENTS: usize = 15;

/// Population variances of the three windows around a split, floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub var_left: f64,
    pub var_right: f64,
    pub var_pooled: f64,
}

/// Prefix sums of `x - x[0]` and its square, so any window variance is O(1).
///
/// Centering on a sample (rather than the mean) keeps integer-valued input
/// exact, which makes the score exactly translation invariant on such data.
/// Sums are carried in double-double precision: plain prefix differences lose
/// most of their digits on low-variance windows, and the logarithm turns that
/// into visible score error.
#[derive(Debug, Clone)]
pub struct MomentPrefix {
    s1: Vec<Dd>,
    s2: Vec<Dd>,
    floor: f64,
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd {
        hi: s,
        lo: (a - (s - bb)) + (b - bb),
    }
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

#[inline]
fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: a.mul_add(b, -p),
    }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let u = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(u.hi, u.lo + t.lo)
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    #[inline]
    fn scale(self, k: f64) -> Dd {
        self.mul(Dd { hi: k, lo: 0.0 })
    }
}

impl MomentPrefix {
    pub fn new(values: &[f64], floor: f64) -> Self {
        let origin = values.first().copied().unwrap_or(0.0);
        let mut s1 = Vec::with_capacity(values.len() + 1);
        let mut s2 = Vec::with_capacity(values.len() + 1);
        let (mut a, mut b) = (Dd::ZERO, Dd::ZERO);
        s1.push(a);
        s2.push(b);
        for &v in values {
            // the difference itself is rounded; keep its error term too
            let d = two_sum(v, -origin);
            a = a.add(d);
            b = b.add(d.mul(d));
            s1.push(a);
            s2.push(b);
        }
        Self { s1, s2, floor }
    }

    pub fn len(&self) -> usize {
        self.s1.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Floored population variance of `values[a..b]`, `a < b`.
    #[inline]
    pub fn variance(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let sum = self.s1[b].add(self.s1[a].neg());
        let sq = self.s2[b].add(self.s2[a].neg());
        let num = sq.scale(n).add(sum.mul(sum).neg());
        let var = (num.hi + num.lo) / (n * n);
        var.max(self.floor)
    }

    #[inline]
    pub fn window_stats(&self, t: usize, delta: usize) -> WindowStats {
        WindowStats {
            var_left: self.variance(t - delta, t),
            var_right: self.variance(t, t + delta),
            var_pooled: self.variance(t - delta, t + delta),
        }
    }

    /// Score at `(t, delta)`; the caller guarantees `delta <= t <= len - delta`.
    #[inline]
    fn score_unchecked(&self, t: usize, delta: usize, penalty_weight: f64) -> f64 {
        let w = self.window_stats(t, delta);
        let d = delta as f64;
        d * w.var_pooled.ln()
            - 0.5 * d * (w.var_left.ln() + w.var_right.ln())
            - penalty_weight * d * (2.0 * d).ln()
    }

    pub fn score(&self, t: usize, delta: usize, penalty_weight: f64) -> Result<f64> {
        let n = self.len();
        if delta == 0 || 2 * delta > n || t < delta || t > n - delta {
            return Err(Error::OutOfSupport {
                t,
                delta,
                lo: delta,
                hi: n.saturating_sub(delta),
            });
        }
        Ok(self.score_unchecked(t, delta, penalty_weight))
    }
}

/// Change score of `s` at split `t` and scale `delta`.
pub fn tscs_score(s: &TimeSeries, t: usize, delta: usize, cfg: &ChangeSpaceConfig) -> Result<f64> {
    MomentPrefix::new(&s.values, cfg.variance_floor).score(t, delta, cfg.penalty_weight)
}

/// Per-index change scores with their valid support.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeCurve {
    pub scores: Vec<f64>,
    /// Inclusive `[lo, hi]`; `None` when no index is valid.
    pub support: Option<(usize, usize)>,
    /// Number of scales summed at each index.
    pub scale_count: Vec<usize>,
}

impl ChangeCurve {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn is_valid(&self, t: usize) -> bool {
        matches!(self.support, Some((lo, hi)) if lo <= t && t <= hi)
    }

    /// Copy restricted to `[lo, hi]`; everything outside is zeroed.
    pub fn restricted(&self, lo: usize, hi: usize) -> ChangeCurve {
        let support = match self.support {
            Some((a, b)) if lo.max(a) <= hi.min(b) => Some((lo.max(a), hi.min(b))),
            _ => None,
        };
        let keep = |t: usize| matches!(support, Some((a, b)) if a <= t && t <= b);
        ChangeCurve {
            scores: (0..self.len())
                .map(|t| if keep(t) { self.scores[t] } else { 0.0 })
                .collect(),
            support,
            scale_count: (0..self.len())
                .map(|t| if keep(t) { self.scale_count[t] } else { 0 })
                .collect(),
        }
    }
}

/// Sum of change scores over every configured scale with `2 * delta <= N`.
pub fn ms_tscs_curve(s: &TimeSeries, cfg: &ChangeSpaceConfig) -> Result<ChangeCurve> {
    let n = s.len();
    let scales = cfg.scales();
    let valid: Vec<usize> = scales.iter().copied().filter(|&d| 2 * d <= n).collect();
    if valid.is_empty() {
        return Err(Error::NoValidScale {
            len: n,
            min_scale: scales.iter().copied().min().unwrap_or(cfg.scale_min),
        });
    }
    let prefix = MomentPrefix::new(&s.values, cfg.variance_floor);
    let mut scores = vec![0.0; n];
    let mut scale_count = vec![0usize; n];
    for &delta in &valid {
        for t in delta..=n - delta {
            scores[t] += prefix.score_unchecked(t, delta, cfg.penalty_weight);
            scale_count[t] += 1;
        }
    }
    let smallest = *valid.iter().min().expect("non-empty");
    Ok(ChangeCurve {
        scores,
        support: Some((smallest, n - smallest)),
        scale_count,
    })
}

/// Centered moving average over the valid support.
///
/// The window is clamped to the largest odd width that fits the support; the
/// support shrinks by half the window on each side.
pub fn smooth_curve(c: &ChangeCurve, cfg: &ChangeSpaceConfig) -> ChangeCurve {
    let Some((lo, hi)) = c.support else {
        return c.clone();
    };
    let span = hi - lo + 1;
    let mut width = cfg.smoothing_window.max(1).min(span);
    if width % 2 == 0 {
        width -= 1;
    }
    let half = (width - 1) / 2;
    if half == 0 {
        return c.clone();
    }
    let (new_lo, new_hi) = (lo + half, hi - half);
    let mut scores = vec![0.0; c.len()];
    let mut scale_count = vec![0; c.len()];
    for t in new_lo..=new_hi {
        let sum: f64 = c.scores[t - half..=t + half].iter().sum();
        scores[t] = sum / width as f64;
        scale_count[t] = c.scale_count[t];
    }
    ChangeCurve {
        scores,
        support: Some((new_lo, new_hi)),
        scale_count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub score: f64,
    pub saliency: f64,
}

/// Salient peaks sorted by descending saliency, then ascending index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.peaks.iter().map(|p| p.index).collect()
    }
}

/// Salient peaks of a (smoothed) change curve.
///
/// A candidate `t` must be an interior strict local maximum (leftmost wins on
/// plateaus) that also dominates every valid index within `saliency_window`
/// on either side. Its saliency is `(score[t] - mu) / sigma`, with `mu` and
/// `sigma` the mean and population standard deviation of the curve over the
/// support excluding `t`; it is kept when saliency exceeds `saliency_sigma`.
pub fn detect_peaks(c: &ChangeCurve, cfg: &ChangeSpaceConfig) -> PeakSet {
    let Some((lo, hi)) = c.support else {
        return PeakSet::default();
    };
    if hi < lo + 2 {
        return PeakSet::default();
    }
    let s = &c.scores;
    let w = cfg.saliency_window;
    let mut peaks = Vec::new();
    for t in lo + 1..hi {
        if s[t] <= s[t - 1] || s[t] < s[t + 1] {
            continue;
        }
        // plateau: the run of equal values must descend on its right
        let mut r = t + 1;
        while r <= hi && s[r] == s[t] {
            r += 1;
        }
        if r > hi || s[r] > s[t] {
            continue;
        }
        let left_ok = (t.saturating_sub(w).max(lo)..t).all(|u| s[u] < s[t]);
        let right_ok = (t + 1..=(t + w).min(hi)).all(|u| s[u] <= s[t]);
        if !(left_ok && right_ok) {
            continue;
        }
        let others = (lo..=hi).filter(|&u| u != t).map(|u| s[u]);
        let m = (hi - lo) as f64;
        let mean = others.clone().sum::<f64>() / m;
        let var = others.map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let saliency = (s[t] - mean) / var.sqrt().max(1e-12);
        if saliency > cfg.saliency_sigma {
            peaks.push(Peak {
                index: t,
                score: s[t],
                saliency,
            });
        }
    }
    peaks.sort_by(|a, b| {
        b.saliency
            .total_cmp(&a.saliency)
            .then(a.index.cmp(&b.index))
    });
    PeakSet { peaks }
}

/// Curve, smoothing and peak detection in one step. Series too short for
/// any scale have no peaks.
pub fn series_peaks(s: &TimeSeries, cfg: &ChangeSpaceConfig) -> Result<PeakSet> {
    match ms_tscs_curve(s, cfg) {
        Ok(curve) => Ok(detect_peaks(&smooth_curve(&curve, cfg), cfg)),
        Err(Error::NoValidScale { .. }) => Ok(PeakSet::default()),
        Err(e) => Err(e),
    }
}

/// Dataset-level segment count: mean over classes of the per-class mean
/// component count, rounded half away from zero and clamped to `[2, 50]`.
/// Falls back to 15 when more than half of the series have no peak.
pub fn select_segment_count(train: &[TimeSeries], cfg: &ChangeSpaceConfig) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut counts = Vec::with_capacity(train.len());
    for (i, s) in train.iter().enumerate() {
        let label = s.label.ok_or(Error::MissingLabel { index: i })?;
        counts.push((label, series_peaks(s, cfg)?.len() + 1));
    }
    Ok(segment_count_from_components(&counts))
}

/// The aggregation behind [`select_segment_count`], over `(label, components)`.
pub fn segment_count_from_components(counts: &[(usize, usize)]) -> usize {
    let peakless = counts.iter().filter(|(_, c)| *c == 1).count();
    if 2 * peakless > counts.len() {
        return FALLBACK_SEGMENTS;
    }
    let mut per_class: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for &(label, c) in counts {
        let e = per_class.entry(label).or_default();
        e.0 += c as f64;
        e.1 += 1;
    }
    let mean = per_class.values().map(|(s, n)| s / *n as f64).sum::<f64>() / per_class.len() as f64;
    (mean.round() as usize).clamp(2, MAX_SEGMENTS)
}

/// Cuts for exactly `k` segments from peak indices ordered by saliency.
///
/// The `k - 1` most salient peaks are kept. Missing cuts come from the
/// uniform grid `round(j * n / k)`, skipping grid points within one index of
/// an existing cut; if the grid is exhausted the longest segment is halved.
pub fn cuts_from_peaks(ranked_peaks: &[usize], k: usize, n: usize) -> Result<SegmentBoundaries> {
    if k > n {
        return Err(Error::KTooLarge { k, len: n });
    }
    if k == 0 {
        return Err(Error::config("segment_count", "must be >= 1"));
    }
    let need = k - 1;
    let mut cuts: Vec<usize> = Vec::with_capacity(need);
    for &p in ranked_peaks {
        if cuts.len() == need {
            break;
        }
        if p > 0 && p < n && !cuts.contains(&p) {
            cuts.push(p);
        }
    }
    for j in 1..k {
        if cuts.len() == need {
            break;
        }
        let g = (j as f64 * n as f64 / k as f64).round() as usize;
        if g > 0 && g < n && cuts.iter().all(|&c| c.abs_diff(g) > 1) {
            cuts.push(g);
        }
    }
    while cuts.len() < need {
        cuts.sort_unstable();
        let b = SegmentBoundaries::new(cuts.clone(), n)?;
        let (a, e) = b
            .segments()
            .into_iter()
            .max_by_key(|&(a, e)| (e - a, std::cmp::Reverse(a)))
            .expect("at least one segment");
        cuts.push(a + (e - a) / 2);
    }
    cuts.sort_unstable();
    SegmentBoundaries::new(cuts, n)
}

/// Splits `s` into exactly `k` components.
pub fn segment_series(
    s: &TimeSeries,
    k: usize,
    cfg: &ChangeSpaceConfig,
) -> Result<SegmentBoundaries> {
    if k > s.len() {
        return Err(Error::KTooLarge { k, len: s.len() });
    }
    if !(2..=MAX_SEGMENTS).contains(&k) {
        return Err(Error::config("segment_count", "must lie in [2, 50]"));
    }
    let peaks = series_peaks(s, cfg)?;
    cuts_from_peaks(&peaks.indices(), k, s.len())
}

/// Window-free segmentation: every salient peak becomes a cut, keeping at
/// most the 49 most salient.
pub fn segment_by_saliency(s: &TimeSeries, cfg: &ChangeSpaceConfig) -> Result<SegmentBoundaries> {
    let peaks = series_peaks(s, cfg)?;
    let mut cuts: Vec<usize> = peaks.indices().into_iter().take(MAX_SEGMENTS - 1).collect();
    cuts.sort_unstable();
    SegmentBoundaries::new(cuts, s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_penalty(pw: f64) -> ChangeSpaceConfig {
        ChangeSpaceConfig {
            penalty_weight: pw,
            ..ChangeSpaceConfig::default()
        }
    }

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::unlabeled(v).unwrap()
    }

    // Two-pass population variance straight from the slice.
    fn naive_var(x: &[f64], floor: f64) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).max(floor)
    }

    fn naive_score(x: &[f64], t: usize, d: usize, pw: f64, floor: f64) -> f64 {
        let df = d as f64;
        df * naive_var(&x[t - d..t + d], floor).ln()
            - df / 2.0 * (naive_var(&x[t - d..t], floor).ln() + naive_var(&x[t..t + d], floor).ln())
            - pw * df * (2.0 * df).ln()
    }

    #[test]
    fn identical_halves_cancel() {
        let x: Vec<f64> = [1.0, 2.0].repeat(10);
        let s = tscs_score(&series(x), 10, 10, &with_penalty(1.0)).unwrap();
        assert_abs_diff_eq!(s, -10.0 * 20f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, -29.957, epsilon = 1e-3);
    }

    #[test]
    fn separated_halves_hand_value() {
        let mut x = [0.0, 1.0].repeat(5);
        x.extend([10.0, 11.0].repeat(5));
        let prefix = MomentPrefix::new(&x, 1e-8);
        let w = prefix.window_stats(10, 10);
        assert_abs_diff_eq!(w.var_left, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(w.var_right, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(w.var_pooled, 25.25, epsilon = 1e-12);
        let s = tscs_score(&series(x), 10, 10, &with_penalty(1.0)).unwrap();
        let expected = 10.0 * 25.25f64.ln() - 5.0 * (2.0 * 0.25f64.ln()) - 10.0 * 20f64.ln();
        assert_abs_diff_eq!(s, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(s, 16.19, epsilon = 5e-3);
    }

    #[test]
    fn constant_series_is_pure_penalty() {
        let x = vec![3.5; 60];
        for (t, d) in [(10, 10), (30, 20), (45, 15)] {
            let s = tscs_score(&series(x.clone()), t, d, &with_penalty(1.0)).unwrap();
            let df = d as f64;
            assert_abs_diff_eq!(s, -df * (2.0 * df).ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_support() {
        let s = series(vec![0.0; 30]);
        let cfg = ChangeSpaceConfig::default();
        assert!(matches!(
            tscs_score(&s, 9, 10, &cfg),
            Err(Error::OutOfSupport { .. })
        ));
        assert!(tscs_score(&s, 21, 10, &cfg).is_err());
        assert!(tscs_score(&s, 20, 10, &cfg).is_ok());
    }

    #[test]
    fn no_valid_scale_for_short_series() {
        let s = series((0..15).map(f64::from).collect());
        assert!(matches!(
            ms_tscs_curve(&s, &ChangeSpaceConfig::default()),
            Err(Error::NoValidScale {
                len: 15,
                min_scale: 10
            })
        ));
    }

    #[test]
    fn support_and_scale_count_enumeration() {
        let s = series((0..40).map(|i| (i as f64 * 0.7).sin()).collect());
        let c = ms_tscs_curve(&s, &ChangeSpaceConfig::with_scales(vec![10, 20])).unwrap();
        assert_eq!(c.support, Some((10, 30)));
        for t in 0..40 {
            let expected = match t {
                20 => 2,
                10..=30 => 1,
                _ => 0,
            };
            assert_eq!(c.scale_count[t], expected, "t={t}");
            if expected == 0 {
                assert_eq!(c.scores[t], 0.0);
            }
        }
    }

    #[test]
    fn identical_halves_curve_non_positive() {
        // period-2 signal: every window of even length has variance 0.25
        let x: Vec<f64> = [0.0, 1.0].repeat(40);
        let s = series(x.clone());
        let cfg = ChangeSpaceConfig {
            scales: Some(vec![4, 8]),
            scale_min: 4,
            scale_max: 8,
            penalty_weight: 1.0,
            ..ChangeSpaceConfig::default()
        };
        let c = ms_tscs_curve(&s, &cfg).unwrap();
        for t in 8..=72 {
            let direct: f64 = [4, 8]
                .iter()
                .map(|&d| naive_score(&x, t, d, 1.0, 1e-8))
                .sum();
            assert_abs_diff_eq!(c.scores[t], direct, epsilon = 1e-9);
            assert!(c.scores[t] <= 0.0);
        }
    }

    #[test]
    fn curve_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = ChangeSpaceConfig::with_scales(vec![2, 4, 8]);
        for _ in 0..50 {
            let n = rng.gen_range(4..=64);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c = ms_tscs_curve(&series(x.clone()), &cfg).unwrap();
            for t in 0..n {
                let mut want = 0.0;
                for d in [2, 4, 8] {
                    if 2 * d <= n && t >= d && t + d <= n {
                        want += naive_score(&x, t, d, 0.0, 1e-8);
                    }
                }
                assert_abs_diff_eq!(c.scores[t], want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn smoothing_identity_and_hand_average() {
        let c = ChangeCurve {
            scores: vec![0.0, 0.0, 3.0, 0.0, 0.0],
            support: Some((0, 4)),
            scale_count: vec![1; 5],
        };
        let one = ChangeSpaceConfig {
            smoothing_window: 1,
            ..ChangeSpaceConfig::default()
        };
        assert_eq!(smooth_curve(&c, &one), c);

        let three = ChangeSpaceConfig {
            smoothing_window: 3,
            ..ChangeSpaceConfig::default()
        };
        let sm = smooth_curve(&c, &three);
        assert_eq!(sm.support, Some((1, 3)));
        assert_eq!(&sm.scores[1..=3], &[1.0, 1.0, 1.0]);
        assert_eq!(sm.scores[0], 0.0);
        assert_eq!(sm.scores[4], 0.0);
    }

    #[test]
    fn smoothing_window_clamped_to_support() {
        let c = ChangeCurve {
            scores: vec![0.0, 3.0, 6.0, 9.0, 12.0, 0.0],
            support: Some((1, 4)),
            scale_count: vec![0, 1, 1, 1, 1, 0],
        };
        let sm = smooth_curve(&c, &ChangeSpaceConfig::default());
        // width 5 clamps to 3 on a support of 4
        assert_eq!(sm.support, Some((2, 3)));
        assert_abs_diff_eq!(sm.scores[2], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sm.scores[3], 9.0, epsilon = 1e-12);
    }

    fn curve_of(scores: Vec<f64>) -> ChangeCurve {
        let n = scores.len();
        ChangeCurve {
            scores,
            support: Some((0, n - 1)),
            scale_count: vec![1; n],
        }
    }

    #[test]
    fn flat_curve_has_no_peaks() {
        let p = detect_peaks(&curve_of(vec![2.5; 40]), &ChangeSpaceConfig::default());
        assert!(p.is_empty());
    }

    #[test]
    fn single_spike() {
        let mut v = vec![0.0; 30];
        v[7] = 10.0;
        let p = detect_peaks(&curve_of(v), &ChangeSpaceConfig::default());
        assert_eq!(p.indices(), vec![7]);
        assert!(p.peaks[0].saliency > 1e6);
    }

    #[test]
    fn two_spikes_ordered_by_saliency() {
        let mut v = vec![0.0; 120];
        v[30] = 6.0;
        v[90] = 10.0;
        let p = detect_peaks(&curve_of(v), &ChangeSpaceConfig::default());
        assert_eq!(p.indices(), vec![90, 30]);
        // hand values: others for the 10-spike are {6, 0 x 118}
        let m = 6.0 / 119.0;
        let sd = (36.0_f64 / 119.0 - m * m).sqrt();
        assert_abs_diff_eq!(p.peaks[0].saliency, (10.0 - m) / sd, epsilon = 1e-9);
        assert!(p.peaks.iter().all(|q| q.saliency >= 2.0));
    }

    #[test]
    fn plateau_keeps_leftmost() {
        let mut v = vec![0.0; 60];
        v[20] = 5.0;
        v[21] = 5.0;
        let p = detect_peaks(&curve_of(v), &ChangeSpaceConfig::default());
        assert_eq!(p.indices(), vec![20]);
    }

    #[test]
    fn segment_count_class_means() {
        let counts = [(0, 3), (0, 5), (1, 4), (1, 4)];
        assert_eq!(segment_count_from_components(&counts), 4);
        let counts = [(0, 41), (1, 77)];
        assert_eq!(segment_count_from_components(&counts), 50);
        let counts = [(0, 1), (1, 1), (1, 1)];
        assert_eq!(segment_count_from_components(&counts), FALLBACK_SEGMENTS);
        // 2.5 rounds away from zero
        let counts = [(0, 2), (1, 3)];
        assert_eq!(segment_count_from_components(&counts), 3);
    }

    #[test]
    fn segment_count_fallback_on_flat_training_set() {
        let train: Vec<TimeSeries> = (0..4)
            .map(|i| TimeSeries::new(vec![1.0; 100], Some(i % 2), "").unwrap())
            .collect();
        let k = select_segment_count(&train, &ChangeSpaceConfig::default()).unwrap();
        assert_eq!(k, 15);
        assert_eq!(
            select_segment_count(&[], &ChangeSpaceConfig::default()),
            Err(Error::EmptyTrainingSet)
        );
    }

    #[test]
    fn uniform_fallback_cuts() {
        let b = cuts_from_peaks(&[], 3, 9).unwrap();
        assert_eq!(b.cuts(), &[3, 6]);
        assert!(b.segments().iter().all(|(a, e)| e - a == 3));
    }

    #[test]
    fn top_salient_peaks_sorted() {
        let b = cuts_from_peaks(&[40, 70, 20], 3, 100).unwrap();
        assert_eq!(b.cuts(), &[40, 70]);
    }

    #[test]
    fn grid_supplement_avoids_collisions() {
        let b = cuts_from_peaks(&[50], 3, 100).unwrap();
        assert_eq!(b.cuts(), &[33, 50]);
        // grid point 50 collides with the peak at 51
        let b = cuts_from_peaks(&[51], 2, 100).unwrap();
        assert_eq!(b.cuts().len(), 1);
        let b = cuts_from_peaks(&[49], 3, 100).unwrap();
        assert_eq!(b.cuts(), &[33, 49]);
        // dense peaks exhaust the grid
        let b = cuts_from_peaks(&[2, 4, 6], 9, 9).unwrap();
        assert_eq!(b.segment_count(), 9);
    }

    #[test]
    fn k_too_large() {
        let s = series(vec![0.0, 1.0, 2.0]);
        assert_eq!(
            segment_series(&s, 4, &ChangeSpaceConfig::default()),
            Err(Error::KTooLarge { k: 4, len: 3 })
        );
    }

    #[test]
    fn step_change_is_found() {
        let x: Vec<f64> = (0..400)
            .map(|i| if i < 200 { 0.0 } else { 3.0 } + ((i * 7919) % 13) as f64 / 13.0)
            .collect();
        let s = series(x);
        let p = series_peaks(&s, &ChangeSpaceConfig::default()).unwrap();
        assert!(p.peaks[0].index.abs_diff(200) <= 3, "{:?}", p.peaks);
        let b = segment_series(&s, 2, &ChangeSpaceConfig::default()).unwrap();
        assert!(b.cuts()[0].abs_diff(200) <= 3);
    }

    proptest! {
        #[test]
        fn translation_invariance_exact(
            xs in proptest::collection::vec(-50i32..50, 24..64),
            shift in -1000i32..1000,
        ) {
            let x: Vec<f64> = xs.iter().map(|&v| f64::from(v)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + f64::from(shift)).collect();
            let cfg = ChangeSpaceConfig::with_scales(vec![2, 4, 8]);
            let a = ms_tscs_curve(&series(x), &cfg).unwrap();
            let b = ms_tscs_curve(&series(y), &cfg).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn amplitude_scaling_invariance(
            xs in proptest::collection::vec(-5.0f64..5.0, 24..64),
            a in prop_oneof![Just(0.5f64), Just(3.0f64)],
        ) {
            let y: Vec<f64> = xs.iter().map(|v| v * a).collect();
            let cfg = ChangeSpaceConfig::with_scales(vec![2, 4, 8]);
            let p = MomentPrefix::new(&xs, cfg.variance_floor);
            let n = xs.len();
            let near_floor = [2usize, 4, 8].iter().any(|&d| {
                (d..=n - d).any(|t| {
                    let w = p.window_stats(t, d);
                    w.var_left.min(w.var_right) < 1e-4
                })
            });
            prop_assume!(!near_floor);
            let ca = ms_tscs_curve(&series(xs.clone()), &cfg).unwrap();
            let cb = ms_tscs_curve(&series(y), &cfg).unwrap();
            for (u, v) in ca.scores.iter().zip(&cb.scores) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }

        #[test]
        fn deterministic(xs in proptest::collection::vec(-5.0f64..5.0, 30..100)) {
            let s = series(xs);
            let cfg = ChangeSpaceConfig::with_scales(vec![5, 10, 15]);
            let a = ms_tscs_curve(&s, &cfg).unwrap();
            let b = ms_tscs_curve(&s, &cfg).unwrap();
            prop_assert_eq!(
                a.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
