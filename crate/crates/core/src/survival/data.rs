use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Right-censored survival outcomes with a raw (unstandardized) covariate
/// matrix. Rows are subjects, columns covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    pub x: DMatrix<f64>,
    /// Follow-up time in months.
    pub time: Vec<f64>,
    /// `true` when the subject progressed, `false` when censored.
    pub event: Vec<bool>,
    pub names: Vec<String>,
}

impl SurvivalData {
    /// Validates shapes, finiteness and positivity of times. Covariates are
    /// named `x1..xp` until [`SurvivalData::with_names`] is called.
    pub fn new(x: DMatrix<f64>, time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        let n = x.nrows();
        if time.len() != n || event.len() != n {
            return Err(Error::shape(format!(
                "survival data: {n} covariate rows, {} times, {} event flags",
                time.len(),
                event.len()
            )));
        }
        if let Some(i) = time.iter().position(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::precondition(format!(
                "survival data: time of subject {i} is {} (must be finite and > 0)",
                time[i]
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("survival data: non-finite covariate".into()));
        }
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Ok(SurvivalData { x, time, event, names })
    }

    /// Builds the covariate matrix from per-subject rows.
    pub fn from_rows(rows: &[Vec<f64>], time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::shape(format!(
                "survival data: row {i} has {} covariates, expected {p}",
                rows[i].len()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(x, time, event)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::shape(format!(
                "{} covariate names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> SurvivalData {
        SurvivalData {
            x: self.x.select_rows(idx),
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
            names: self.names.clone(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Per-covariate z-scoring constants (population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Fails with a precondition error on a constant column.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            if col.iter().all(|&v| v == col[0]) {
                return Err(Error::precondition(format!("covariate column {j} is constant")));
            }
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            sd.push(var.sqrt());
        }
        Ok(Standardization { mean, sd })
    }

    /// Like [`Standardization::fit`], but a constant column gets `sd = 1`
    /// and standardizes to zero, so a penalized fit keeps its coefficient
    /// at exactly zero.
    pub fn fit_allow_constant(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let constant = col.iter().all(|&v| v == col[0]);
            mean.push(if constant { col[0] } else { m });
            sd.push(if constant { 1.0 } else { var.sqrt() });
        }
        Standardization { mean, sd }
    }

    pub fn identity(p: usize) -> Self {
        Standardization {
            mean: vec![0.0; p],
            sd: vec![1.0; p],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.sd[j])
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.len() {
            return Err(Error::shape(format!(
                "{} covariates given, model expects {}",
                row.len(),
                self.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}
