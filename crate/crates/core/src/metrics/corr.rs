//! Agreement and two-sample statistics.

use crate::error::{Error, Result};
use crate::metrics::special::normal_sf;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("pearson_r: lengths differ"));
    }
    if x.len() < 3 {
        return Err(Error::precondition("pearson_r needs at least 3 observations"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One-way random-effects, single-measure ICC(1,1) for `n x k` ratings:
/// `(MSB - MSW) / (MSB + (k - 1) MSW)`.
pub fn icc(ratings: &[Vec<f64>]) -> Result<f64> {
    let n = ratings.len();
    if n < 3 {
        return Err(Error::precondition("icc needs at least 3 subjects"));
    }
    let k = ratings[0].len();
    if k < 2 || ratings.iter().any(|r| r.len() != k) {
        return Err(Error::shape(
            "icc: every subject needs the same number (>= 2) of ratings",
        ));
    }
    let grand = ratings.iter().flatten().sum::<f64>() / (n * k) as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for r in ratings {
        let m = mean(r);
        ssb += k as f64 * (m - grand).powi(2);
        ssw += r.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let msb = ssb / (n - 1) as f64;
    let msw = ssw / (n * (k - 1)) as f64;
    let denom = msb + (k - 1) as f64 * msw;
    if denom <= 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((msb - msw) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Wilcoxon rank-sum test, normal approximation with tie and
/// continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::precondition("wilcoxon_rank_sum: both samples must be nonempty"));
    }
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    if all.iter().any(|v| !v.0.is_finite()) {
        return Err(Error::Numeric("wilcoxon_rank_sum: non-finite value".into()));
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total = all.len();
    let mut w = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j < total && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        w += avg_rank * all[i..j].iter().filter(|v| v.1).count() as f64;
        i = j;
    }
    let (n1, n2, nt) = (a.len() as f64, b.len() as f64, total as f64);
    let mu = n1 * (nt + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    if var <= 0.0 {
        return Ok(RankSum {
            statistic: w,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let z = ((w - mu).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(RankSum {
        statistic: w,
        z: z * (w - mu).signum(),
        p_value: (2.0 * normal_sf(z)).min(1.0),
    })
}
