//! L1-penalized Cox regression by cyclic coordinate descent.
//!
//! Each coordinate takes a soft-thresholded Newton step on its exact
//! one-dimensional derivatives, backtracked until the penalized objective
//! does not increase. Sweeps alternate between all coordinates and the
//! current active set until no coefficient moves by more than the tolerance.
//! Between sweeps, Newton steps on the active set with its signs held fixed
//! (the objective is smooth there) finish off ill-conditioned problems that
//! coordinate descent alone converges on only linearly.

use crate::error::{Error, Result};
use crate::survival::data::{Standardization, SurvivalData};
use crate::survival::fit::solve as newton_direction;
use crate::survival::partial::RiskSets;

pub const LASSO_TOL: f64 = 1e-7;
pub const DEFAULT_PATH_LEN: usize = 100;
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;
const MAX_SWEEPS: usize = 100_000;
const MAX_NEWTON_STEPS: usize = 50;

/// Coefficients (standardized units) at each penalty of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub standardization: Standardization,
    pub lambda_max: f64,
    /// Coordinate sweeps spent at each penalty.
    pub sweeps: Vec<usize>,
}

impl LassoPath {
    pub fn nonzero(&self, k: usize) -> usize {
        self.betas[k].iter().filter(|&&b| b != 0.0).count()
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Smallest penalty whose solution is exactly zero: `max_j |dl/dbeta_j(0)|`.
pub(crate) fn lambda_max_of(rs: &RiskSets) -> f64 {
    let eta = vec![0.0; rs.n];
    (0..rs.p).map(|j| rs.coordinate(&eta, j).0.abs()).fold(0.0, f64::max)
}

/// `count` log-spaced penalties from `lambda_max` down to
/// `min_ratio * lambda_max`.
pub fn lambda_sequence(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == 0 {
                lambda_max
            } else {
                lambda_max * (step * k as f64).exp()
            }
        })
        .collect()
}

/// Penalized objective `l(beta) + lambda * |beta|_1` on standardized data.
pub fn lasso_objective(data: &SurvivalData, std: &Standardization, beta: &[f64], lambda: f64) -> Result<f64> {
    if beta.len() != data.p() || std.len() != data.p() {
        return Err(Error::shape("lasso objective: dimension mismatch"));
    }
    let rs = RiskSets::from_data(data, &std.apply(&data.x));
    let eta = rs.eta(beta);
    Ok(rs.value(&eta) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>())
}

struct Solver<'a> {
    rs: &'a RiskSets,
    beta: Vec<f64>,
    eta: Vec<f64>,
    value: f64,
}

impl Solver<'_> {
    /// Updates coordinate `j`; returns the absolute change.
    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let (g, h) = self.rs.coordinate(&self.eta, j);
        let b = self.beta[j];
        if h <= 0.0 {
            // Flat direction: the covariate is constant within every risk
            // set that matters, so only the penalty acts on it.
            if b != 0.0 && g.abs() <= lambda {
                self.set(j, 0.0);
                return b.abs();
            }
            return 0.0;
        }
        let target = soft_threshold(h * b - g, lambda) / h;
        if target == b {
            return 0.0;
        }
        let old = self.value + lambda * b.abs();
        let mut s = 1.0;
        for _ in 0..50 {
            let nb = if s == 1.0 { target } else { b + s * (target - b) };
            let xj = self.rs.column(j);
            let eta: Vec<f64> = self.eta.iter().zip(xj).map(|(e, x)| e + (nb - b) * x).collect();
            let v = self.rs.value(&eta);
            if v + lambda * nb.abs() <= old {
                self.beta[j] = nb;
                self.eta = eta;
                self.value = v;
                return (nb - b).abs();
            }
            s *= 0.5;
        }
        0.0
    }

    fn set(&mut self, j: usize, nb: f64) {
        let d = nb - self.beta[j];
        for (e, x) in self.eta.iter_mut().zip(self.rs.column(j)) {
            *e += d * x;
        }
        self.beta[j] = nb;
        self.value = self.rs.value(&self.eta);
    }

    /// Newton iterations on the nonzero coefficients with their signs fixed.
    /// A step that would cross zero is cut at the first crossing and that
    /// coefficient leaves the active set; coordinate sweeps may revive it.
    fn newton_active(&mut self, lambda: f64) {
        for _ in 0..MAX_NEWTON_STEPS {
            let active: Vec<usize> = (0..self.rs.p).filter(|&j| self.beta[j] != 0.0).collect();
            if active.is_empty() {
                return;
            }
            let (_, g, h) = self.rs.full_on(&self.eta, &active);
            let grad: Vec<f64> = active
                .iter()
                .zip(&g)
                .map(|(&j, gj)| gj + lambda * self.beta[j].signum())
                .collect();
            let Some(d) = newton_direction(&h, &grad) else { return };
            let mut t_max = 1.0;
            let mut blocking = None;
            for (k, &j) in active.iter().enumerate() {
                let b = self.beta[j];
                if d[k] != 0.0 && (b - d[k]).signum() != b.signum() {
                    let t = b / d[k];
                    if t < t_max {
                        t_max = t;
                        blocking = Some(k);
                    }
                }
            }
            let old = self.value + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>();
            let mut t = t_max;
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = self.beta.clone();
                for (k, &j) in active.iter().enumerate() {
                    cand[j] -= t * d[k];
                }
                if t == t_max {
                    if let Some(k) = blocking {
                        cand[active[k]] = 0.0;
                    }
                }
                let eta = self.rs.eta(&cand);
                let v = self.rs.value(&eta);
                let pen = v + lambda * cand.iter().map(|b| b.abs()).sum::<f64>();
                if pen.is_finite() && pen < old {
                    self.beta = cand;
                    self.eta = eta;
                    self.value = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return;
            }
        }
    }

    fn sweep(&mut self, coords: impl Iterator<Item = usize>, lambda: f64) -> f64 {
        let mut max_change: f64 = 0.0;
        for j in coords {
            max_change = max_change.max(self.update(j, lambda));
        }
        max_change
    }

    /// Minimizes at `lambda` from the current (warm) coefficients.
    fn solve(&mut self, lambda: f64) -> Result<usize> {
        let p = self.rs.p;
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            if self.sweep(0..p, lambda) < LASSO_TOL {
                return Ok(sweeps);
            }
            self.newton_active(lambda);
            loop {
                let active: Vec<usize> = (0..p).filter(|&j| self.beta[j] != 0.0).collect();
                sweeps += 1;
                if self.sweep(active.into_iter(), lambda) < LASSO_TOL {
                    break;
                }
                if sweeps > MAX_SWEEPS {
                    break;
                }
            }
            if sweeps > MAX_SWEEPS {
                return Err(Error::Divergence(format!(
                    "coordinate descent did not converge at lambda {lambda:e} within {MAX_SWEEPS} sweeps"
                )));
            }
        }
    }
}

/// Path on risk sets whose covariates are already on the coefficient scale.
pub(crate) fn path_on(rs: &RiskSets, lambdas: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    check_lambdas(lambdas)?;
    if rs.n_events() == 0 {
        return Err(Error::precondition("LASSO fit needs at least one event"));
    }
    let beta = vec![0.0; rs.p];
    let eta = rs.eta(&beta);
    let value = rs.value(&eta);
    let mut solver = Solver { rs, beta, eta, value };
    let mut betas = Vec::with_capacity(lambdas.len());
    let mut sweeps = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        sweeps.push(solver.solve(lambda)?);
        betas.push(solver.beta.clone());
    }
    Ok((betas, sweeps))
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::precondition("penalties must be finite and >= 0"));
    }
    if let Some(k) = lambdas.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::precondition(format!(
            "penalty sequence must be decreasing (index {} to {})",
            k,
            k + 1
        )));
    }
    Ok(())
}

/// Fits the LASSO path on internally standardized covariates. With
/// `lambdas = None` the default path of 100 log-spaced penalties from
/// `lambda_max` to `0.001 * lambda_max` is used.
pub fn fit_lasso_path(data: &SurvivalData, lambdas: Option<&[f64]>) -> Result<LassoPath> {
    let std = Standardization::fit_allow_constant(&data.x);
    let rs = RiskSets::from_data(data, &std.apply(&data.x));
    if rs.n_events() == 0 {
        return Err(Error::precondition("LASSO fit needs at least one event"));
    }
    let lambda_max = lambda_max_of(&rs);
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => lambda_sequence(lambda_max, DEFAULT_PATH_LEN, DEFAULT_MIN_RATIO),
    };
    let (betas, sweeps) = path_on(&rs, &lambdas)?;
    Ok(LassoPath {
        lambdas,
        betas,
        standardization: std,
        lambda_max,
        sweeps,
    })
}
