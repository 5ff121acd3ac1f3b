//! Binary and time-dependent (IPCW) ROC analysis.

use crate::error::{Error, Result};
use crate::metrics::km::censoring_km;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive.
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// From threshold `+inf` (nothing positive) down to the smallest score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Weighted Mann-Whitney core. Cases carry weights; controls are unweighted
/// (their IPCW weight is a constant that cancels). Returns the curve with
/// `AUC = sum_i w_i (less_i + eq_i / 2) / (sum_i w_i * n_controls)`.
fn weighted_roc(case_scores: &[f64], case_weights: &[f64], control_scores: &[f64]) -> RocCurve {
    let mut ctrl = control_scores.to_vec();
    ctrl.sort_by(f64::total_cmp);
    let n_ctrl = ctrl.len();
    let w_total: f64 = case_weights.iter().sum();
    let mut num = 0.0;
    for (&s, &w) in case_scores.iter().zip(case_weights) {
        let less = ctrl.partition_point(|&c| c < s);
        let le = ctrl.partition_point(|&c| c <= s);
        num += w * (2 * less + (le - less)) as f64;
    }
    let auc = num / (2.0 * w_total * n_ctrl as f64);

    let mut thresholds: Vec<f64> = case_scores.iter().chain(control_scores).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut cases: Vec<(f64, f64)> = case_scores.iter().copied().zip(case_weights.iter().copied()).collect();
    cases.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        sensitivity: 0.0,
        specificity: 1.0,
    }];
    let (mut ci, mut w_pos) = (0, 0.0);
    for &t in &thresholds {
        while ci < cases.len() && cases[ci].0 >= t {
            w_pos += cases[ci].1;
            ci += 1;
        }
        let ctrl_below = ctrl.partition_point(|&c| c < t);
        points.push(RocPoint {
            threshold: t,
            sensitivity: w_pos / w_total,
            specificity: ctrl_below as f64 / n_ctrl as f64,
        });
    }
    RocCurve { points, auc }
}

/// Empirical ROC and Mann-Whitney AUC with half credit for ties.
pub fn binary_roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::shape("binary_roc_auc: scores and labels differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("binary_roc_auc: non-finite score".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|p| !*p.1).map(|p| *p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::precondition("binary_roc_auc: both classes must be present"));
    }
    Ok(weighted_roc(&pos, &vec![1.0; pos.len()], &neg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdRoc {
    pub horizon: f64,
    pub curve: RocCurve,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Cumulative-case / dynamic-control ROC at `horizon` with inverse
/// probability of censoring weights. Cases (`T <= t`, event) are weighted by
/// `1 / G(T-)`, controls (`T > t`) by `1 / G(t)`, with `G` the Kaplan-Meier
/// estimate of the censoring distribution.
pub fn td_roc_ipcw(risks: &[f64], times: &[f64], events: &[bool], horizon: f64) -> Result<TdRoc> {
    if risks.len() != times.len() || risks.len() != events.len() {
        return Err(Error::shape("td_roc_ipcw: input lengths differ"));
    }
    if risks.iter().chain(times).any(|v| !v.is_finite()) || !horizon.is_finite() {
        return Err(Error::Numeric("td_roc_ipcw: non-finite input".into()));
    }
    let g = censoring_km(times, events)?;
    let mut case_s = Vec::new();
    let mut case_w = Vec::new();
    let mut ctrl = Vec::new();
    for i in 0..risks.len() {
        if times[i] <= horizon && events[i] {
            let gi = g.before(times[i]);
            if gi <= 0.0 {
                return Err(Error::UndefinedWeight(format!(
                    "censoring survival is 0 just before case time {}",
                    times[i]
                )));
            }
            case_s.push(risks[i]);
            case_w.push(1.0 / gi);
        } else if times[i] > horizon {
            ctrl.push(risks[i]);
        }
    }
    if case_s.is_empty() || ctrl.is_empty() {
        return Err(Error::precondition(format!(
            "td_roc_ipcw: need cases and controls at horizon {horizon} ({} cases, {} controls)",
            case_s.len(),
            ctrl.len()
        )));
    }
    if g.at(horizon) <= 0.0 {
        return Err(Error::UndefinedWeight(format!(
            "censoring survival is 0 at horizon {horizon}"
        )));
    }
    Ok(TdRoc {
        horizon,
        n_cases: case_s.len(),
        n_controls: ctrl.len(),
        curve: weighted_roc(&case_s, &case_w, &ctrl),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_and_constant() {
        let l = [false, false, true, true];
        assert_eq!(binary_roc_auc(&[0.1, 0.2, 0.8, 0.9], &l).unwrap().auc, 1.0);
        assert_eq!(binary_roc_auc(&[0.5; 4], &l).unwrap().auc, 0.5);
    }

    #[test]
    fn roc_endpoints() {
        let c = binary_roc_auc(&[0.3, 0.1, 0.7, 0.5], &[false, true, true, false]).unwrap();
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert_eq!((first.sensitivity, first.specificity), (0.0, 1.0));
        assert_eq!((last.sensitivity, last.specificity), (1.0, 0.0));
    }

    #[test]
    fn one_class_rejected() {
        assert!(binary_roc_auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn td_matches_binary_without_censoring() {
        let risks = [0.9, 0.3, 0.6, 0.2, 0.8, 0.4];
        let times = [5.0, 30.0, 12.0, 40.0, 8.0, 25.0];
        let events = [true; 6];
        let td = td_roc_ipcw(&risks, &times, &events, 12.0).unwrap();
        let labels: Vec<bool> = times.iter().map(|&t| t <= 12.0).collect();
        assert_eq!(td.curve.auc, binary_roc_auc(&risks, &labels).unwrap().auc);
        let perfect: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        assert_eq!(td_roc_ipcw(&perfect, &times, &events, 12.0).unwrap().curve.auc, 1.0);
    }
}
