//! Covariate-adjusted comparison of survival across groups: likelihood-ratio
//! test of group indicators in a Cox model that also contains the
//! adjustment covariates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::special::chi2_sf;
use crate::survival::{fit_cox, SurvivalData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRatio {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// `groups[i]` is a dense index in `0..k` (group 0 is the reference);
/// `covariates[i]` holds subject `i`'s adjustment covariates (possibly none).
pub fn adjusted_group_test(
    groups: &[usize],
    covariates: &[Vec<f64>],
    times: &[f64],
    events: &[bool],
) -> Result<LikelihoodRatio> {
    let n = groups.len();
    if covariates.len() != n || times.len() != n || events.len() != n {
        return Err(Error::shape("adjusted test: inputs differ in length"));
    }
    let k = groups.iter().max().map_or(0, |&g| g + 1);
    if k < 2 {
        return Err(Error::precondition("adjusted test: need at least two groups"));
    }
    if let Some(g) = (0..k).find(|g| !groups.contains(g)) {
        return Err(Error::precondition(format!("adjusted test: group {g} has no subjects")));
    }
    let q = covariates.first().map_or(0, Vec::len);
    let null = SurvivalData::from_rows(covariates, times.to_vec(), events.to_vec())?;
    let full_x = DMatrix::from_fn(n, q + k - 1, |i, j| {
        if j < q {
            covariates[i][j]
        } else if groups[i] == j - q + 1 {
            1.0
        } else {
            0.0
        }
    });
    let full = SurvivalData::new(full_x, times.to_vec(), events.to_vec())?;
    let l0 = fit_cox(&null)?.log_partial_likelihood;
    let l1 = fit_cox(&full)?.log_partial_likelihood;
    let statistic = (2.0 * (l1 - l0)).max(0.0);
    let df = k - 1;
    Ok(LikelihoodRatio {
        statistic,
        p_value: chi2_sf(statistic, df as f64),
        df,
    })
}
