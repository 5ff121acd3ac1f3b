//! `COXFIT1` text container.
//!
//! ```text
//! COXFIT1
//! lambda=<f64>
//! log_partial_likelihood=<f64>
//! iterations=<usize>
//! covariates=<p>
//! covariate=<name>,<mean>,<sd>,<beta>,<se or ->
//! ... (p lines)
//! baseline_steps=<m>
//! baseline=<t>,<H0(t)>
//! ... (m lines)
//! ```
//! Numbers use the shortest representation that round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::survival::baseline::BaselineHazard;
use crate::survival::data::Standardization;
use crate::survival::fit::CoxFit;

pub const COXFIT_MAGIC: &str = "COXFIT1";

pub fn write_coxfit(fit: &CoxFit) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "{COXFIT_MAGIC}");
    let _ = writeln!(s, "lambda={}", fit.lambda);
    let _ = writeln!(s, "log_partial_likelihood={}", fit.log_partial_likelihood);
    let _ = writeln!(s, "iterations={}", fit.iterations);
    let _ = writeln!(s, "covariates={}", fit.beta.len());
    for j in 0..fit.beta.len() {
        let name = &fit.names[j];
        if name.is_empty() || name.contains([',', '=', '\n', '\r']) {
            return Err(Error::precondition(format!(
                "covariate name {name:?} cannot be stored (empty, or contains ',', '=' or a newline)"
            )));
        }
        let se = fit
            .std_errors
            .as_ref()
            .map_or_else(|| "-".to_string(), |v| v[j].to_string());
        let _ = writeln!(
            s,
            "covariate={name},{},{},{},{se}",
            fit.standardization.mean[j], fit.standardization.sd[j], fit.beta[j]
        );
    }
    let _ = writeln!(s, "baseline_steps={}", fit.baseline.times.len());
    for (t, h) in fit.baseline.times.iter().zip(&fit.baseline.cumhaz) {
        let _ = writeln!(s, "baseline={t},{h}");
    }
    Ok(s)
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next `key=value` line, checking the key; offsets are 1-based lines.
    fn field(&mut self, key: &str) -> Result<(u64, &'a str)> {
        let (i, line) = self
            .it
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected '{key}='")))?;
        let line_no = i as u64 + 1;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok((line_no, v)),
            _ => Err(Error::parse(line_no, format!("expected '{key}=', found {line:?}"))),
        }
    }
}

fn num<T: std::str::FromStr>(line: u64, what: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {v:?}")))
}

pub fn read_coxfit(text: &str) -> Result<CoxFit> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
    };
    match lines.it.next() {
        Some((_, l)) if l == COXFIT_MAGIC => {}
        Some((_, l)) => return Err(Error::parse(1, format!("bad header {l:?}, expected {COXFIT_MAGIC:?}"))),
        None => return Err(Error::parse(0, "empty file")),
    }
    let (ln, v) = lines.field("lambda")?;
    let lambda: f64 = num(ln, "lambda", v)?;
    let (ln, v) = lines.field("log_partial_likelihood")?;
    let log_partial_likelihood: f64 = num(ln, "log partial likelihood", v)?;
    let (ln, v) = lines.field("iterations")?;
    let iterations: usize = num(ln, "iteration count", v)?;
    let (ln, v) = lines.field("covariates")?;
    let p: usize = num(ln, "covariate count", v)?;

    let mut names = Vec::with_capacity(p);
    let mut std = Standardization {
        mean: Vec::with_capacity(p),
        sd: Vec::with_capacity(p),
    };
    let mut beta = Vec::with_capacity(p);
    let mut se = Vec::with_capacity(p);
    for _ in 0..p {
        let (ln, v) = lines.field("covariate")?;
        let parts: Vec<&str> = v.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::parse(
                ln,
                format!("covariate line needs 5 fields, found {}", parts.len()),
            ));
        }
        names.push(parts[0].to_string());
        std.mean.push(num(ln, "mean", parts[1])?);
        let sd: f64 = num(ln, "sd", parts[2])?;
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::parse(ln, format!("standard deviation must be > 0, got {sd}")));
        }
        std.sd.push(sd);
        let b: f64 = num(ln, "coefficient", parts[3])?;
        if !b.is_finite() {
            return Err(Error::parse(ln, "non-finite coefficient"));
        }
        beta.push(b);
        se.push(if parts[4] == "-" {
            None
        } else {
            Some(num::<f64>(ln, "standard error", parts[4])?)
        });
    }
    let std_errors = if se.iter().all(Option::is_some) && (p > 0 || lambda == 0.0) {
        Some(se.into_iter().map(Option::unwrap).collect())
    } else if se.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::parse(0, "standard errors given for some covariates only"));
    };

    let (ln, v) = lines.field("baseline_steps")?;
    let m: usize = num(ln, "baseline step count", v)?;
    let mut baseline = BaselineHazard::default();
    for _ in 0..m {
        let (ln, v) = lines.field("baseline")?;
        let (t, h) = v
            .split_once(',')
            .ok_or_else(|| Error::parse(ln, "baseline line needs 't,H0'"))?;
        let t: f64 = num(ln, "time", t)?;
        let h: f64 = num(ln, "cumulative hazard", h)?;
        let prev_t = baseline.times.last().copied().unwrap_or(f64::NEG_INFINITY);
        let prev_h = baseline.cumhaz.last().copied().unwrap_or(0.0);
        if !(t > prev_t) || !(h >= prev_h) || !h.is_finite() {
            return Err(Error::parse(
                ln,
                "baseline must have increasing times and nondecreasing, finite, nonnegative hazard",
            ));
        }
        baseline.times.push(t);
        baseline.cumhaz.push(h);
    }
    if let Some((i, l)) = lines.it.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(i as u64 + 1, format!("unexpected trailing line {l:?}")));
    }
    Ok(CoxFit {
        names,
        standardization: std,
        beta,
        std_errors,
        lambda,
        baseline,
        log_partial_likelihood,
        iterations,
    })
}

pub fn save_coxfit(fit: &CoxFit, path: &Path) -> Result<()> {
    std::fs::write(path, write_coxfit(fit)?).map_err(|e| Error::io(path, e))
}

pub fn load_coxfit(path: &Path) -> Result<CoxFit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_coxfit(&text)
}
