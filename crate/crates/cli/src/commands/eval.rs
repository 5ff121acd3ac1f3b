use std::collections::BTreeMap;
use std::path::Path;

use hippoprog::metrics::{
    adjusted_group_test, bootstrap_ci, concordance_index, kaplan_meier, logrank_test, stratify_by_risk, td_roc_ipcw,
    RiskGroup, TieRule, DEFAULT_RESAMPLES,
};
use hippoprog::pipeline::{fmt_num, write_csv, ManifestRow};
use hippoprog::Error;

use super::{create_dir, sorted_manifest};
use crate::error::{usage, CliError};
use crate::settings::{parse_horizons, parse_list, Settings};
use crate::tables::Table;
use crate::Common;

/// Predicted `eta` joined with observed follow-up, in `subject_id` order.
struct Joined {
    ids: Vec<String>,
    eta: Vec<f64>,
    time: Vec<f64>,
    event: Vec<bool>,
    rows: Vec<ManifestRow>,
}

fn join(predictions: &Path, manifest: &Path) -> Result<Joined, CliError> {
    let table = Table::read(predictions)?;
    let col = table
        .column("eta")
        .ok_or_else(|| usage(format!("{}: missing column 'eta'", predictions.display())))?;
    let by_id: BTreeMap<String, ManifestRow> = sorted_manifest(manifest)?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let mut j = Joined {
        ids: Vec::new(),
        eta: Vec::new(),
        time: Vec::new(),
        event: Vec::new(),
        rows: Vec::new(),
    };
    for (id, vals) in &table.rows {
        let row = by_id
            .get(id)
            .ok_or_else(|| usage(format!("subject '{id}' is not in {}", manifest.display())))?;
        let (Some(t), Some(e)) = (row.time, row.event) else {
            return Err(CliError::Core(Error::Precondition(format!(
                "subject {id} lacks time_months/event"
            ))));
        };
        j.ids.push(id.clone());
        j.eta.push(vals[col]);
        j.time.push(t);
        j.event.push(e);
        j.rows.push(row.clone());
    }
    Ok(j)
}

pub fn evaluate(
    common: &Common,
    predictions: &Path,
    manifest: &Path,
    horizon: Option<&str>,
    tie_rule: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    let rule: TieRule = settings.text(tie_rule, "tie_rule").unwrap_or("strict").parse()?;
    let horizons = parse_horizons(settings.text(horizon, "horizon"))?;
    let resamples: usize = settings.get("bootstrap_resamples", DEFAULT_RESAMPLES)?;
    let j = join(predictions, manifest)?;

    let c = concordance_index(&j.eta, &j.time, &j.event, rule)?;
    let ci = bootstrap_ci(j.eta.len(), resamples, 0.95, settings.seed, |idx| {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let ev: Vec<bool> = idx.iter().map(|&i| j.event[i]).collect();
        Ok(concordance_index(&pick(&j.eta), &pick(&j.time), &ev, rule)?.c_index)
    })
    .ok();
    let (lo, hi) = ci.map_or((f64::NAN, f64::NAN), |c| (c.lower, c.upper));
    println!("c_index={:.6}", c.c_index);
    println!("c_index_ci95={lo:.6},{hi:.6}");
    println!("pairs={}", c.pairs);

    let mut metrics = vec![
        ("c_index".to_string(), c.c_index),
        ("c_index_lower".to_string(), lo),
        ("c_index_upper".to_string(), hi),
        ("pairs".to_string(), c.pairs as f64),
    ];
    let mut rocs = Vec::new();
    for &h in &horizons {
        let roc = td_roc_ipcw(&j.eta, &j.time, &j.event, h)?;
        println!("auc_{}={:.6}", fmt_num(h), roc.curve.auc);
        metrics.push((format!("auc_{}", fmt_num(h)), roc.curve.auc));
        rocs.push((h, roc));
    }

    if let Some(dir) = out {
        create_dir(dir)?;
        let rows: Vec<Vec<String>> = metrics.iter().map(|(k, v)| vec![k.clone(), fmt_num(*v)]).collect();
        write_csv(&dir.join("evaluation.csv"), &["metric", "value"], &rows)?;
        for (h, roc) in &rocs {
            let pts: Vec<Vec<String>> = roc
                .curve
                .points
                .iter()
                .map(|p| vec![fmt_num(p.threshold), fmt_num(p.sensitivity), fmt_num(p.specificity)])
                .collect();
            write_csv(
                &dir.join(format!("roc_{}.csv", fmt_num(*h))),
                &["threshold", "sensitivity", "specificity"],
                &pts,
            )?;
        }
    }
    Ok(())
}

/// Maps present groups to dense indices in Low, Middle, High order.
fn dense(groups: &[RiskGroup]) -> Vec<usize> {
    let mut present: Vec<RiskGroup> = groups.to_vec();
    present.sort();
    present.dedup();
    groups
        .iter()
        .map(|g| present.iter().position(|p| p == g).expect("present"))
        .collect()
}

pub fn stratify(
    common: &Common,
    predictions: &Path,
    manifest: &Path,
    adjust: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    let j = join(predictions, manifest)?;
    let groups = stratify_by_risk(&j.eta)?;
    create_dir(out)?;

    let rows: Vec<Vec<String>> = (0..j.ids.len())
        .map(|i| vec![j.ids[i].clone(), fmt_num(j.eta[i]), groups[i].to_string()])
        .collect();
    write_csv(&out.join("groups.csv"), &["subject_id", "eta", "group"], &rows)?;

    let mut km_rows = Vec::new();
    let mut counts = [0usize; 3];
    for g in [RiskGroup::Low, RiskGroup::Middle, RiskGroup::High] {
        let idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == g).collect();
        counts[g.index()] = idx.len();
        if idx.is_empty() {
            continue;
        }
        let t: Vec<f64> = idx.iter().map(|&i| j.time[i]).collect();
        let e: Vec<bool> = idx.iter().map(|&i| j.event[i]).collect();
        let km = kaplan_meier(&t, &e)?;
        km_rows.push(vec![
            g.to_string(),
            "0".into(),
            "1".into(),
            idx.len().to_string(),
            "0".into(),
        ]);
        for k in 0..km.times.len() {
            km_rows.push(vec![
                g.to_string(),
                fmt_num(km.times[k]),
                fmt_num(km.survival[k]),
                km.at_risk[k].to_string(),
                km.events[k].to_string(),
            ]);
        }
    }
    write_csv(
        &out.join("km.csv"),
        &["group", "time", "survival", "at_risk", "events"],
        &km_rows,
    )?;
    println!("low={} middle={} high={}", counts[0], counts[1], counts[2]);

    let mut tests = Vec::new();
    let all = dense(&groups);
    if all.iter().any(|&g| g > 0) {
        let lr = logrank_test(&all, &j.time, &j.event)?;
        tests.push(("all", lr.statistic, lr.p_value, lr.df));
    }
    let lh: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] != RiskGroup::Middle).collect();
    if counts[0] > 0 && counts[2] > 0 {
        let g: Vec<usize> = lh.iter().map(|&i| usize::from(groups[i] == RiskGroup::High)).collect();
        let t: Vec<f64> = lh.iter().map(|&i| j.time[i]).collect();
        let e: Vec<bool> = lh.iter().map(|&i| j.event[i]).collect();
        let lr = logrank_test(&g, &t, &e)?;
        tests.push(("low_vs_high", lr.statistic, lr.p_value, lr.df));
    }
    if let Some(cols) = settings.text(adjust, "adjust") {
        let cols = parse_list(cols);
        let cov = j
            .rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| {
                        r.clinical.get(c).copied().ok_or_else(|| {
                            CliError::Core(Error::Precondition(format!("subject {} has no value for '{c}'", r.id)))
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let lr = adjusted_group_test(&all, &cov, &j.time, &j.event)?;
        tests.push(("adjusted_all", lr.statistic, lr.p_value, lr.df));
    }
    let rows: Vec<Vec<String>> = tests
        .iter()
        .map(|(name, s, p, df)| vec![name.to_string(), fmt_num(*s), fmt_num(*p), df.to_string()])
        .collect();
    write_csv(
        &out.join("logrank.csv"),
        &["comparison", "statistic", "p_value", "df"],
        &rows,
    )?;
    for (name, s, p, df) in &tests {
        println!(
            "logrank_{name} statistic={} p_value={} df={df}",
            fmt_num(*s),
            fmt_num(*p)
        );
    }
    Ok(())
}
