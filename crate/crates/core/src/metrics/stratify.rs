//! Quartile-based risk groups.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiskGroup {
    Low,
    Middle,
    High,
}

impl RiskGroup {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RiskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskGroup::Low => "Low",
            RiskGroup::Middle => "Middle",
            RiskGroup::High => "High",
        })
    }
}

/// Linear-interpolation sample quantile (`h = (n - 1) p`) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Low: `risk < Q1`; High: `risk >= Q3`; Middle otherwise.
pub fn stratify_by_risk(risks: &[f64]) -> Result<Vec<RiskGroup>> {
    if risks.len() < 4 {
        return Err(Error::precondition(format!(
            "stratify needs at least 4 subjects, got {}",
            risks.len()
        )));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("stratify: non-finite risk".into()));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(risks
        .iter()
        .map(|&r| {
            if r >= q3 {
                RiskGroup::High
            } else if r < q1 {
                RiskGroup::Low
            } else {
                RiskGroup::Middle
            }
        })
        .collect())
}
