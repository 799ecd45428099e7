// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wall-clock timing of the change-curve kernel.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::change_space::ms_tscs_curve;
use crate::config::ChangeSpaceConfig;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const DEFAULT_REPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub length: usize,
    pub reps: usize,
    /// Scales that fit the series.
    pub scales_used: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Median time of `reps` curve evaluations on a seeded Gaussian series,
/// on the calling thread.
pub fn bench_curve(
    length: usize,
    cfg: &ChangeSpaceConfig,
    reps: usize,
    seed: u64,
) -> Result<BenchReport> {
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::config("reps", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let s = TimeSeries::unlabeled(values)?;
    // warm-up, and surfaces NoValidScale before timing
    let curve = ms_tscs_curve(&s, cfg)?;
    let scales_used = cfg.scales().iter().filter(|&&d| 2 * d <= length).count();
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            let c = ms_tscs_curve(&s, cfg).expect("validated above");
            std::hint::black_box(&c);
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    std::hint::black_box(&curve);
    times.sort_by(f64::total_cmp);
    let median_ms = if reps % 2 == 1 {
        times[reps / 2]
    } else {
        0.5 * (times[reps / 2 - 1] + times[reps / 2])
    };
    Ok(BenchReport {
        length,
        reps,
        scales_used,
        median_ms,
        min_ms: times[0],
        max_ms: times[reps - 1],
    })
}
