//! Unpenalized Cox regression by Newton–Raphson.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::special::normal_sf;
use crate::survival::baseline::{breslow_baseline, BaselineHazard};
use crate::survival::data::{Standardization, SurvivalData};
use crate::survival::partial::RiskSets;

pub const NEWTON_MAX_ITERS: usize = 100;
pub const NEWTON_GRAD_TOL: f64 = 1e-8;
/// A standardized coefficient this large means the likelihood is monotone
/// (complete separation); a hazard ratio of e^20 per SD is not an estimate.
pub const DIVERGENCE_BOUND: f64 = 20.0;

/// A fitted proportional-hazards model on standardized covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub standardization: Standardization,
    pub beta: Vec<f64>,
    /// Wald standard errors from the inverse observed information
    /// (unpenalized fits only).
    pub std_errors: Option<Vec<f64>>,
    /// L1 strength; 0 for an unpenalized fit.
    pub lambda: f64,
    pub baseline: BaselineHazard,
    pub log_partial_likelihood: f64,
    pub iterations: usize,
}

/// One line of a coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub beta: f64,
    pub hazard_ratio: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl CoxFit {
    /// Hazard ratios per standardized unit with Wald 95% intervals. Without
    /// standard errors the inferential columns are NaN.
    pub fn summary(&self) -> Vec<CoefficientRow> {
        const Z975: f64 = 1.959963984540054;
        (0..self.beta.len())
            .map(|j| {
                let beta = self.beta[j];
                let se = self.std_errors.as_ref().map_or(f64::NAN, |s| s[j]);
                let z = beta / se;
                CoefficientRow {
                    name: self.names[j].clone(),
                    beta,
                    hazard_ratio: beta.exp(),
                    se,
                    z,
                    p_value: 2.0 * normal_sf(z.abs()),
                    ci_lower: (beta - Z975 * se).exp(),
                    ci_upper: (beta + Z975 * se).exp(),
                }
            })
            .collect()
    }

    pub fn nonzero(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

pub(crate) fn solve(h: &DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = DVector::from_column_slice(g);
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    h.clone().lu().solve(&rhs)
}

pub(crate) struct NewtonResult {
    pub beta: Vec<f64>,
    pub value: f64,
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

/// Newton–Raphson with step halving on already-scaled risk sets.
pub(crate) fn newton(rs: &RiskSets) -> Result<NewtonResult> {
    let p = rs.p;
    let mut beta = vec![0.0; p];
    let mut eta = rs.eta(&beta);
    let (mut value, mut grad, mut hess) = rs.full(&eta);
    for iter in 0..NEWTON_MAX_ITERS {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < NEWTON_GRAD_TOL {
            return Ok(NewtonResult {
                beta,
                value,
                hessian: hess,
                iterations: iter,
            });
        }
        let step = solve(&hess, &grad).ok_or_else(|| Error::Numeric("singular information matrix".into()))?;
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b - s * d).collect();
            let cand_eta = rs.eta(&cand);
            let v = rs.value(&cand_eta);
            // Near the optimum the decrease drops below the resolution of
            // the objective; steps within rounding of it are accepted.
            if v.is_finite() && v <= value + 1e-12 * (1.0 + value.abs()) {
                accepted = Some((cand, cand_eta));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, cand_eta)) = accepted else {
            // No decrease is representable along the Newton direction: the
            // iterate is optimal to working precision.
            if gnorm < 1e-5 {
                return Ok(NewtonResult {
                    beta,
                    value,
                    hessian: hess,
                    iterations: iter,
                });
            }
            return Err(Error::Numeric(format!(
                "line search failed at iteration {iter} (gradient norm {gnorm:e})"
            )));
        };
        if cand.iter().any(|b| b.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Divergence(format!(
                "coefficient exceeded {DIVERGENCE_BOUND} standardized units at iteration {}: \
                 monotone likelihood (separation)",
                iter + 1
            )));
        }
        beta = cand;
        eta = cand_eta;
        (value, grad, hess) = rs.full(&eta);
    }
    Err(Error::Divergence(format!(
        "Newton iterations did not converge in {NEWTON_MAX_ITERS} steps"
    )))
}

/// Fits an unpenalized Cox model on internally z-scored covariates.
///
/// Requires fewer covariates than events and no constant column. A model
/// with zero covariates is allowed and yields the null likelihood.
pub fn fit_cox(data: &SurvivalData) -> Result<CoxFit> {
    let events = data.n_events();
    if events == 0 {
        return Err(Error::precondition("Cox fit needs at least one event"));
    }
    if data.p() >= events {
        return Err(Error::precondition(format!(
            "{} covariates with only {events} events",
            data.p()
        )));
    }
    let std = Standardization::fit(&data.x)?;
    let z = std.apply(&data.x);
    let rs = RiskSets::from_data(data, &z);
    let res = newton(&rs)?;
    let std_errors = if data.p() == 0 {
        Vec::new()
    } else {
        let inv = res
            .hessian
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular information matrix".into()))?;
        inv.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    };
    let eta: Vec<f64> = (0..data.n())
        .map(|i| z.row(i).iter().zip(&res.beta).map(|(a, b)| a * b).sum())
        .collect();
    Ok(CoxFit {
        names: data.names.clone(),
        standardization: std,
        baseline: breslow_baseline(data, &eta)?,
        beta: res.beta,
        std_errors: Some(std_errors),
        lambda: 0.0,
        log_partial_likelihood: -res.value,
        iterations: res.iterations,
    })
}

/// Linear predictors of `data`'s own rows under `fit`, in data order.
pub fn linear_predictors(fit: &CoxFit, data: &SurvivalData) -> Result<Vec<f64>> {
    (0..data.n())
        .map(|i| crate::survival::predict_risk(fit, &data.row(i)))
        .collect()
}
