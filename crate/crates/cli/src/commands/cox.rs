use std::path::{Path, PathBuf};

use hippoprog::data::Label;
use hippoprog::pipeline::{fmt_num, write_csv, ManifestRow};
use hippoprog::survival::{
    fit_cox as fit_unpenalized, fit_lasso_cox, load_coxfit, predict_risk, predict_survival, save_coxfit, CoxFit,
    SurvivalData, DEFAULT_FOLDS,
};
use hippoprog::Error;

use super::{sibling, sorted_manifest};
use crate::error::{usage, CliError};
use crate::settings::{parse_horizons, parse_list, Settings};
use crate::tables::{write_table, Table};
use crate::Common;

/// Name of the covariate carrying an imaging model's linear predictor.
pub const IMAGING_RISK: &str = "imaging_risk";

const DEFAULT_CLINICAL: &str = "age,sex,education,apoe4";

pub struct FitCoxArgs {
    pub manifest: PathBuf,
    pub features: Option<PathBuf>,
    pub out: PathBuf,
    pub cv_out: Option<PathBuf>,
    pub clinical: bool,
    pub combined: bool,
    pub covariates: Option<String>,
    pub imaging: Option<PathBuf>,
    pub folds: Option<usize>,
}

/// Looks up covariates by name: feature columns first, then the imaging
/// risk score, then clinical manifest columns.
struct Resolver<'a> {
    features: Option<(Table, &'a Path)>,
    imaging: Option<CoxFit>,
}

impl Resolver<'_> {
    fn value(&self, name: &str, row: &ManifestRow) -> Result<f64, CliError> {
        if let Some((t, path)) = &self.features {
            if let Some(j) = t.column(name) {
                return Ok(t.get(&row.id, path)?[j]);
            }
        }
        if name == IMAGING_RISK {
            let fit = self
                .imaging
                .as_ref()
                .ok_or_else(|| usage(format!("covariate '{IMAGING_RISK}' needs an imaging Cox model")))?;
            let x = self.vector(&fit.names, row)?;
            return Ok(predict_risk(fit, &x)?);
        }
        if let Some(&v) = row.clinical.get(name) {
            return Ok(v);
        }
        let known = hippoprog::pipeline::CLINICAL_COLUMNS.contains(&name);
        if known || self.features.is_none() {
            Err(CliError::Core(Error::Precondition(format!(
                "subject {} has no value for covariate '{name}'",
                row.id
            ))))
        } else {
            Err(usage(format!("unknown covariate '{name}'")))
        }
    }

    fn vector(&self, names: &[String], row: &ManifestRow) -> Result<Vec<f64>, CliError> {
        names.iter().map(|n| self.value(n, row)).collect()
    }
}

fn survival_rows(rows: &[ManifestRow]) -> Result<(Vec<f64>, Vec<bool>), CliError> {
    let mut time = Vec::with_capacity(rows.len());
    let mut event = Vec::with_capacity(rows.len());
    for r in rows {
        match (r.time, r.event) {
            (Some(t), Some(e)) => {
                time.push(t);
                event.push(e);
            }
            _ => {
                return Err(CliError::Core(Error::Precondition(format!(
                    "subject {} lacks time_months/event",
                    r.id
                ))))
            }
        }
    }
    Ok((time, event))
}

pub fn fit_cox(common: &Common, args: &FitCoxArgs) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    if args.clinical && args.combined {
        return Err(usage("--clinical and --combined are mutually exclusive"));
    }
    if args.imaging.is_some() && !args.combined {
        return Err(usage("--coxfit (imaging model) is only used with --combined"));
    }
    let lasso = !args.clinical && !args.combined;
    if (lasso || args.combined) && args.features.is_none() {
        return Err(usage("--features is required unless --clinical is given"));
    }
    if args.combined && args.imaging.is_none() {
        return Err(usage("--combined requires --coxfit with the imaging model"));
    }

    let rows: Vec<ManifestRow> = sorted_manifest(&args.manifest)?
        .into_iter()
        .filter(|r| r.label == Label::Mci)
        .collect();
    if rows.is_empty() {
        return Err(CliError::Core(Error::Precondition(format!(
            "{}: no MCI rows",
            args.manifest.display()
        ))));
    }
    let (time, event) = survival_rows(&rows)?;
    let features = match &args.features {
        Some(p) => Some((Table::read(p)?, p.as_path())),
        None => None,
    };
    let imaging = args.imaging.as_deref().map(load_coxfit).transpose()?;

    let names: Vec<String> = if lasso {
        features.as_ref().expect("checked").0.columns.clone()
    } else {
        let list = settings
            .text(args.covariates.as_deref(), "covariates")
            .unwrap_or(DEFAULT_CLINICAL);
        let mut names = parse_list(list);
        if let Some(bad) = names
            .iter()
            .find(|n| !hippoprog::pipeline::CLINICAL_COLUMNS.contains(&n.as_str()))
        {
            return Err(usage(format!("'{bad}' is not a clinical column")));
        }
        if args.combined {
            names.push(IMAGING_RISK.to_string());
        }
        names
    };
    let resolver = Resolver { features, imaging };
    let x = rows
        .iter()
        .map(|r| resolver.vector(&names, r))
        .collect::<Result<Vec<_>, _>>()?;
    let data = SurvivalData::from_rows(&x, time, event)?.with_names(names)?;

    let fit = if lasso {
        let folds = settings.pick(args.folds, "folds", DEFAULT_FOLDS)?;
        let (fit, cv) = fit_lasso_cox(&data, folds, settings.seed)?;
        let curve: Vec<Vec<String>> = (0..cv.lambdas.len())
            .map(|k| {
                vec![
                    fmt_num(cv.lambdas[k]),
                    fmt_num(cv.mean_deviance[k]),
                    fmt_num(cv.se_deviance[k]),
                    u8::from(k == cv.best).to_string(),
                ]
            })
            .collect();
        let cv_out = args.cv_out.clone().unwrap_or_else(|| sibling(&args.out, ".cv.csv"));
        write_csv(&cv_out, &["lambda", "mean_deviance", "se_deviance", "selected"], &curve)?;
        fit
    } else {
        fit_unpenalized(&data)?
    };
    save_coxfit(&fit, &args.out)?;

    let coef: Vec<Vec<String>> = fit
        .summary()
        .into_iter()
        .map(|c| {
            let mut row = vec![c.name];
            row.extend(
                [c.beta, c.hazard_ratio, c.se, c.z, c.p_value, c.ci_lower, c.ci_upper]
                    .into_iter()
                    .map(fmt_num),
            );
            row
        })
        .collect();
    write_csv(
        &sibling(&args.out, ".coef.csv"),
        &[
            "covariate",
            "beta",
            "hazard_ratio",
            "se",
            "z",
            "p_value",
            "ci_lower",
            "ci_upper",
        ],
        &coef,
    )?;
    println!(
        "subjects={} events={} covariates={} nonzero={} lambda={}",
        data.n(),
        data.n_events(),
        data.p(),
        fit.nonzero(),
        fmt_num(fit.lambda)
    );
    Ok(())
}

pub fn predict(
    common: &Common,
    manifest: &Path,
    coxfit: &Path,
    features: Option<&Path>,
    imaging: Option<&Path>,
    horizon: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    let horizons = parse_horizons(settings.text(horizon, "horizon"))?;
    let fit = load_coxfit(coxfit)?;
    let resolver = Resolver {
        features: features.map(|p| Table::read(p).map(|t| (t, p))).transpose()?,
        imaging: imaging.map(load_coxfit).transpose()?,
    };
    let rows = sorted_manifest(manifest)?;
    let mut table = Vec::with_capacity(rows.len());
    for r in &rows {
        let x = resolver.vector(&fit.names, r)?;
        let mut v = vec![predict_risk(&fit, &x)?];
        for &h in &horizons {
            v.push(1.0 - predict_survival(&fit, &x, h)?);
        }
        table.push((r.id.clone(), v));
    }
    let mut columns = vec!["eta".to_string()];
    columns.extend(horizons.iter().map(|&h| format!("risk_{}", fmt_num(h))));
    write_table(out, &columns, &table)?;
    println!("subjects={} horizons={}", table.len(), horizons.len());
    Ok(())
}
