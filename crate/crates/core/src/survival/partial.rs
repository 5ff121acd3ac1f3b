//! Negative log partial likelihood with Breslow ties.
//!
//! Subjects are kept sorted by decreasing time so that every risk set
//! `R(t) = {j : t_j >= t}` is a prefix; a single pass accumulates the
//! weighted sums `S0`, `S1`, `S2`. Weights are `exp(eta - max eta)`, which
//! leaves every ratio unchanged and keeps the sums finite.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::survival::data::SurvivalData;

/// Value, gradient and per-coordinate second derivatives of
/// `-sum_{events i} [eta_i - log sum_{j in R(t_i)} exp(eta_j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLikelihood {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian_diag: Vec<f64>,
}

/// Covariates reordered by decreasing time, column-major.
#[derive(Debug, Clone)]
pub(crate) struct RiskSets {
    pub n: usize,
    pub p: usize,
    x: Vec<f64>,
    event: Vec<bool>,
    /// Half-open ranges of tied times, in sorted order.
    groups: Vec<(usize, usize)>,
    /// Sorted position -> original row.
    pub order: Vec<usize>,
}

impl RiskSets {
    /// `x` must already be on the scale the coefficients refer to.
    pub fn new(x: &DMatrix<f64>, time: &[f64], event: &[bool]) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
        let mut xs = Vec::with_capacity(n * p);
        for j in 0..p {
            xs.extend(order.iter().map(|&i| x[(i, j)]));
        }
        let mut groups = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || time[order[k]] != time[order[start]] {
                groups.push((start, k));
                start = k;
            }
        }
        RiskSets {
            n,
            p,
            x: xs,
            event: order.iter().map(|&i| event[i]).collect(),
            groups,
            order,
        }
    }

    pub fn from_data(data: &SurvivalData, x: &DMatrix<f64>) -> Self {
        Self::new(x, &data.time, &data.event)
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    /// Linear predictor in sorted order.
    pub fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, &v) in eta.iter_mut().zip(self.column(j)) {
                    *e += b * v;
                }
            }
        }
        eta
    }

    fn weights(eta: &[f64]) -> Vec<f64> {
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        eta.iter().map(|&e| (e - m).exp()).collect()
    }

    /// Negative log partial likelihood only.
    pub fn value(&self, eta: &[f64]) -> f64 {
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut v = 0.0;
        for &(a, b) in &self.groups {
            for &e in &eta[a..b] {
                s0 += (e - m).exp();
            }
            let log_s0 = s0.ln();
            for k in a..b {
                if self.event[k] {
                    v -= eta[k] - m - log_s0;
                }
            }
        }
        v
    }

    /// First and second derivative along coordinate `j`.
    pub fn coordinate(&self, eta: &[f64], j: usize) -> (f64, f64) {
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let xj = self.column(j);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut g, mut h) = (0.0, 0.0);
        for &(a, b) in &self.groups {
            for k in a..b {
                let w = (eta[k] - m).exp();
                s0 += w;
                s1 += w * xj[k];
                s2 += w * xj[k] * xj[k];
            }
            let d = self.event[a..b].iter().filter(|&&e| e).count();
            if d > 0 {
                let mean = s1 / s0;
                let var = (s2 / s0 - mean * mean).max(0.0);
                let sx: f64 = (a..b).filter(|&k| self.event[k]).map(|k| xj[k]).sum();
                g -= sx - d as f64 * mean;
                h += d as f64 * var;
            }
        }
        (g, h)
    }

    /// Value, gradient and full Hessian.
    pub fn full(&self, eta: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let cols: Vec<usize> = (0..self.p).collect();
        self.full_on(eta, &cols)
    }

    /// Value, plus gradient and Hessian restricted to the columns `cols`.
    pub fn full_on(&self, eta: &[f64], cols: &[usize]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let p = cols.len();
        let w = Self::weights(eta);
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let mut value = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = DMatrix::<f64>::zeros(p, p);
        let mut xk = vec![0.0; p];
        for &(a, b) in &self.groups {
            for k in a..b {
                for (v, &j) in xk.iter_mut().zip(cols) {
                    *v = self.x[j * self.n + k];
                }
                s0 += w[k];
                for r in 0..p {
                    s1[r] += w[k] * xk[r];
                    for c in 0..=r {
                        s2[(r, c)] += w[k] * xk[r] * xk[c];
                    }
                }
            }
            let d = self.event[a..b].iter().filter(|&&e| e).count();
            if d == 0 {
                continue;
            }
            let df = d as f64;
            let log_s0 = s0.ln();
            for k in (a..b).filter(|&k| self.event[k]) {
                value -= eta[k] - m - log_s0;
                for (g, &j) in grad.iter_mut().zip(cols) {
                    *g -= self.x[j * self.n + k];
                }
            }
            for r in 0..p {
                let mr = s1[r] / s0;
                grad[r] += df * mr;
                for c in 0..=r {
                    let h = df * (s2[(r, c)] / s0 - mr * s1[c] / s0);
                    hess[(r, c)] += h;
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                hess[(c, r)] = hess[(r, c)];
            }
        }
        (value, grad, hess)
    }
}

/// Evaluates the negative log partial likelihood of `beta` on the raw
/// covariates of `data` (no standardization is applied here).
pub fn neg_log_partial_likelihood(data: &SurvivalData, beta: &[f64]) -> Result<PartialLikelihood> {
    if beta.len() != data.p() {
        return Err(Error::shape(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            data.p()
        )));
    }
    if data.n_events() == 0 {
        return Err(Error::precondition("partial likelihood needs at least one event"));
    }
    let rs = RiskSets::from_data(data, &data.x);
    let eta = rs.eta(beta);
    let (value, gradient, hess) = rs.full(&eta);
    Ok(PartialLikelihood {
        value,
        gradient,
        hessian_diag: hess.diagonal().iter().copied().collect(),
    })
}
