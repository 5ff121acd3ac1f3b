//! K-fold cross-validated choice of the LASSO penalty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::survival::baseline::breslow_baseline;
use crate::survival::data::{Standardization, SurvivalData};
use crate::survival::fit::CoxFit;
use crate::survival::lasso::{lambda_max_of, lambda_sequence, path_on, DEFAULT_MIN_RATIO, DEFAULT_PATH_LEN};
use crate::survival::partial::RiskSets;

pub const DEFAULT_FOLDS: usize = 10;

/// Cross-validation curve over the penalty path.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean over folds of the held-out deviance contribution.
    pub mean_deviance: Vec<f64>,
    /// Standard error of that mean across folds.
    pub se_deviance: Vec<f64>,
    /// Index of the minimizing penalty (the largest one on ties).
    pub best: usize,
    pub lambda_min: f64,
    /// Fold of each subject, in data order.
    pub fold_of: Vec<usize>,
}

/// Stratified fold labels: events and censored subjects are shuffled
/// separately and dealt round-robin, the censored deal continuing where the
/// events stopped.
pub fn stratified_folds(event: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut fold_of = vec![0; event.len()];
    let mut k = 0;
    for want in [true, false] {
        let mut idx: Vec<usize> = (0..event.len()).filter(|&i| event[i] == want).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = k % folds;
            k += 1;
        }
    }
    fold_of
}

/// Selects the penalty minimizing the mean cross-validated deviance.
///
/// Covariates are standardized once on the full data so that every fold's
/// coefficients share units. For fold `k` with training fit `b_k`, the
/// held-out contribution is `2 * (L(b_k) - L_{-k}(b_k))`, where `L` is the
/// negative log partial likelihood on all subjects and `L_{-k}` on the
/// training subjects only.
pub fn cv_select_lambda(data: &SurvivalData, folds: usize, seed: u64) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::precondition("cross-validation needs at least 2 folds"));
    }
    let events = data.n_events();
    if events < folds {
        return Err(Error::precondition(format!(
            "{events} events is fewer than {folds} folds"
        )));
    }
    let std = Standardization::fit_allow_constant(&data.x);
    let z = std.apply(&data.x);
    let full = RiskSets::from_data(data, &z);
    let lambdas = lambda_sequence(lambda_max_of(&full), DEFAULT_PATH_LEN, DEFAULT_MIN_RATIO);
    let fold_of = stratified_folds(&data.event, folds, seed);

    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let train: Vec<usize> = (0..data.n()).filter(|&i| fold_of[i] != k).collect();
            let zt = z.select_rows(&train);
            let tt: Vec<f64> = train.iter().map(|&i| data.time[i]).collect();
            let et: Vec<bool> = train.iter().map(|&i| data.event[i]).collect();
            let rs = RiskSets::new(&zt, &tt, &et);
            let (betas, _) = path_on(&rs, &lambdas)?;
            Ok(betas
                .iter()
                .map(|b| 2.0 * (full.value(&full.eta(b)) - rs.value(&rs.eta(b))))
                .collect())
        })
        .collect::<Result<_>>()?;

    let kf = folds as f64;
    let mut mean_deviance = Vec::with_capacity(lambdas.len());
    let mut se_deviance = Vec::with_capacity(lambdas.len());
    for l in 0..lambdas.len() {
        let m = per_fold.iter().map(|f| f[l]).sum::<f64>() / kf;
        let var = per_fold.iter().map(|f| (f[l] - m).powi(2)).sum::<f64>() / (kf - 1.0);
        mean_deviance.push(m);
        se_deviance.push((var / kf).sqrt());
    }
    let mut best = 0;
    for (l, &d) in mean_deviance.iter().enumerate() {
        if d < mean_deviance[best] {
            best = l;
        }
    }
    Ok(CvResult {
        lambda_min: lambdas[best],
        lambdas,
        mean_deviance,
        se_deviance,
        best,
        fold_of,
    })
}

/// Cross-validates the penalty, then refits the full-data path and returns
/// the model at the selected penalty together with the CV curve.
pub fn fit_lasso_cox(data: &SurvivalData, folds: usize, seed: u64) -> Result<(CoxFit, CvResult)> {
    let cv = cv_select_lambda(data, folds, seed)?;
    let std = Standardization::fit_allow_constant(&data.x);
    let z = std.apply(&data.x);
    let rs = RiskSets::from_data(data, &z);
    let (betas, sweeps) = path_on(&rs, &cv.lambdas[..=cv.best])?;
    let beta = betas.into_iter().next_back().expect("non-empty path");
    let eta_sorted = rs.eta(&beta);
    let value = rs.value(&eta_sorted);
    let mut eta = vec![0.0; data.n()];
    for (pos, &i) in rs.order.iter().enumerate() {
        eta[i] = eta_sorted[pos];
    }
    let fit = CoxFit {
        names: data.names.clone(),
        standardization: std,
        baseline: breslow_baseline(data, &eta)?,
        beta,
        std_errors: None,
        lambda: cv.lambda_min,
        log_partial_likelihood: -value,
        iterations: sweeps.iter().sum(),
    };
    Ok((fit, cv))
}
