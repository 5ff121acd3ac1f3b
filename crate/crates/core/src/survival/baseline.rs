use crate::error::{Error, Result};
use crate::survival::data::SurvivalData;
use crate::survival::fit::CoxFit;

/// Breslow cumulative baseline hazard as a right-continuous step function
/// over the distinct event times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumhaz: Vec<f64>,
}

impl BaselineHazard {
    /// `H0(t)`: cumulative hazard over event times `<= t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumhaz[k - 1]
        }
    }
}

/// `H0(t) = sum_{t_k <= t} d_k / sum_{j in R(t_k)} exp(eta_j)`, with
/// `eta` the linear predictor of each subject in `data` order.
pub fn breslow_baseline(data: &SurvivalData, eta: &[f64]) -> Result<BaselineHazard> {
    if eta.len() != data.n() {
        return Err(Error::shape(format!(
            "{} linear predictors for {} subjects",
            eta.len(),
            data.n()
        )));
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| data.time[b].total_cmp(&data.time[a]));
    // Risk-set sums from the longest time down, then emitted ascending.
    let mut steps = Vec::new();
    let mut s0 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = data.time[order[i]];
        let mut d = 0usize;
        while i < order.len() && data.time[order[i]] == t {
            s0 += eta[order[i]].exp();
            d += usize::from(data.event[order[i]]);
            i += 1;
        }
        if d > 0 {
            steps.push((t, d as f64 / s0));
        }
    }
    steps.reverse();
    let mut h = 0.0;
    let mut out = BaselineHazard::default();
    for (t, inc) in steps {
        h += inc;
        out.times.push(t);
        out.cumhaz.push(h);
    }
    Ok(out)
}

/// A subject's linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScore {
    pub id: String,
    pub eta: f64,
}

/// `eta = standardized(x)^T beta`.
pub fn predict_risk(fit: &CoxFit, covariates: &[f64]) -> Result<f64> {
    let z = fit.standardization.apply_row(covariates)?;
    Ok(z.iter().zip(&fit.beta).map(|(a, b)| a * b).sum())
}

/// `S(t | x) = exp(-H0(t) exp(eta))`; progression probability is `1 - S`.
pub fn predict_survival(fit: &CoxFit, covariates: &[f64], t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::precondition(format!("survival time must be >= 0, got {t}")));
    }
    let eta = predict_risk(fit, covariates)?;
    let h0 = fit.baseline.at(t);
    if h0 == 0.0 {
        return Ok(1.0);
    }
    Ok((-h0 * eta.exp()).exp())
}
