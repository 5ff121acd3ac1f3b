//! k-group log-rank test.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::special::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRank {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// `groups[i]` is a dense group index in `0..k`; every group must be
/// non-empty and `k >= 2`.
pub fn logrank_test(groups: &[usize], times: &[f64], events: &[bool]) -> Result<LogRank> {
    if groups.len() != times.len() || groups.len() != events.len() {
        return Err(Error::shape("logrank: groups, times and events differ in length"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("logrank: non-finite time".into()));
    }
    let k = groups.iter().max().map_or(0, |&g| g + 1);
    let mut sizes = vec![0usize; k];
    for &g in groups {
        sizes[g] += 1;
    }
    if k < 2 {
        return Err(Error::precondition("logrank: need at least two groups"));
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::precondition(format!("logrank: group {g} has no subjects")));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let mut o_minus_e = DVector::<f64>::zeros(k);
    let mut v = DMatrix::<f64>::zeros(k, k);
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut end = i;
        let mut d_g = vec![0.0; k];
        let mut leaving = vec![0.0; k];
        while end < order.len() && times[order[end]] == t {
            let s = order[end];
            if events[s] {
                d_g[groups[s]] += 1.0;
            }
            leaving[groups[s]] += 1.0;
            end += 1;
        }
        let d: f64 = d_g.iter().sum();
        let n: f64 = at_risk.iter().sum();
        if d > 0.0 {
            for g in 0..k {
                o_minus_e[g] += d_g[g] - d * at_risk[g] / n;
            }
            if n > 1.0 {
                let f = d * (n - d) / (n - 1.0);
                for g in 0..k {
                    for h in 0..k {
                        let delta = if g == h { 1.0 } else { 0.0 };
                        v[(g, h)] += f * at_risk[g] / n * (delta - at_risk[h] / n);
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
        i = end;
    }
    let df = k - 1;
    let u = o_minus_e.rows(0, df).into_owned();
    let vr = v.view((0, 0), (df, df)).into_owned();
    let statistic = if u.iter().all(|&x| x == 0.0) {
        0.0
    } else {
        let sol = vr
            .clone()
            .cholesky()
            .map(|c| c.solve(&u))
            .or_else(|| vr.lu().solve(&u))
            .ok_or_else(|| Error::Numeric("logrank: singular variance matrix".into()))?;
        u.dot(&sol).max(0.0)
    };
    Ok(LogRank {
        statistic,
        p_value: chi2_sf(statistic, df as f64),
        df,
    })
}
