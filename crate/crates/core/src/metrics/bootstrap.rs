//! Percentile bootstrap over subjects.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::stratify::quantile_sorted;

pub const DEFAULT_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Resamples on which the statistic was defined.
    pub valid: usize,
}

/// Seed of resample `b`, derived from the master seed with SplitMix64 mixing.
fn resample_seed(master: u64, b: usize) -> u64 {
    let mut z = master.wrapping_add((b as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Percentile interval of `stat` over `resamples` draws of `n` subject
/// indices with replacement. Resamples where `stat` fails (for example no
/// comparable pairs) are skipped and excluded from `valid`.
pub fn bootstrap_ci<F>(n: usize, resamples: usize, level: f64, seed: u64, stat: F) -> Result<BootstrapCi>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if n == 0 || resamples == 0 || !(0.0 < level && level < 1.0) {
        return Err(Error::precondition(
            "bootstrap: need n > 0, resamples > 0 and level in (0, 1)",
        ));
    }
    let values: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = Xoshiro256StarStar::seed_from_u64(resample_seed(seed, b));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut ok: Vec<f64> = values.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::precondition("bootstrap: statistic undefined on every resample"));
    }
    ok.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        lower: quantile_sorted(&ok, alpha),
        upper: quantile_sorted(&ok, 1.0 - alpha),
        level,
        valid: ok.len(),
    })
}
