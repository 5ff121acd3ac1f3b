//! Manifest CSV: one row per subject with volume paths, label, follow-up and
//! optional clinical covariates.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{Label, SubjectRecord};
use crate::error::{Error, Result};
use crate::pipeline::format::fmt_num;
use crate::pipeline::volume_file::read_volume;

pub const REQUIRED_COLUMNS: [&str; 6] = ["subject_id", "left_path", "right_path", "label", "time_months", "event"];

pub const CLINICAL_COLUMNS: [&str; 11] = [
    "age",
    "sex",
    "education",
    "apoe4",
    "adas13",
    "ravlt_immediate",
    "ravlt_learning",
    "faq",
    "mmse",
    "csf_abeta42",
    "suvr",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub left_path: PathBuf,
    pub right_path: PathBuf,
    pub label: Label,
    pub time: Option<f64>,
    pub event: Option<bool>,
    pub clinical: BTreeMap<String, f64>,
}

fn parse_opt_f64(field: &str, col: &str, line: u64) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() {
        return Ok(None);
    }
    let v: f64 = f
        .parse()
        .map_err(|_| Error::parse(line, format!("column {col}: '{f}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("column {col}: non-finite value")));
    }
    Ok(Some(v))
}

/// Reads and validates a manifest. Relative volume paths are resolved against
/// the manifest's directory. Parse error offsets are 1-based line numbers.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot =
            col(name).ok_or_else(|| Error::Config(format!("{}: missing required column '{name}'", path.display())))?;
    }
    let clinical: Vec<(&str, usize)> = CLINICAL_COLUMNS
        .iter()
        .filter_map(|&c| col(c).map(|i| (c, i)))
        .collect();

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| rec.get(i).unwrap_or("");
        let id = get(idx[0]).to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty subject_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(line, format!("duplicate subject_id '{id}'")));
        }
        let label: Label = get(idx[3])
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let time = parse_opt_f64(get(idx[4]), "time_months", line)?;
        let event = match get(idx[5]) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(Error::parse(line, format!("column event: '{other}' is not 0/1"))),
        };
        if let Some(t) = time {
            if t <= 0.0 {
                return Err(Error::parse(line, format!("time_months must be positive, got {t}")));
            }
        }
        if label == Label::Mci && (time.is_none() || event.is_none()) {
            return Err(Error::parse(
                line,
                format!("MCI subject '{id}' lacks time_months/event"),
            ));
        }
        let mut clin = BTreeMap::new();
        for &(name, i) in &clinical {
            if let Some(v) = parse_opt_f64(get(i), name, line)? {
                clin.insert(name.to_string(), v);
            }
        }
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        rows.push(ManifestRow {
            left_path: resolve(get(idx[1])),
            right_path: resolve(get(idx[2])),
            id,
            label,
            time,
            event,
            clinical: clin,
        });
    }
    Ok(rows)
}

/// Writes rows with paths as given (callers pass manifest-relative paths).
pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(CLINICAL_COLUMNS);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut f = vec![
                r.id.clone(),
                r.left_path.to_string_lossy().into_owned(),
                r.right_path.to_string_lossy().into_owned(),
                r.label.to_string(),
                r.time.map(fmt_num).unwrap_or_default(),
                r.event
                    .map(|e| if e { "1" } else { "0" }.to_string())
                    .unwrap_or_default(),
            ];
            f.extend(
                CLINICAL_COLUMNS
                    .iter()
                    .map(|c| r.clinical.get(*c).map(|&v| fmt_num(v)).unwrap_or_default()),
            );
            f
        })
        .collect();
    crate::pipeline::format::write_csv(path, &header, &body)
}

/// Loads the volumes referenced by `rows`, preserving row order.
pub fn load_records(rows: &[ManifestRow]) -> Result<Vec<SubjectRecord>> {
    rows.par_iter()
        .map(|r| {
            let left = read_volume(&r.left_path)?;
            let right = read_volume(&r.right_path)?;
            if left.dims() != right.dims() {
                return Err(Error::shape(format!(
                    "subject {}: left {} and right {} dims differ",
                    r.id,
                    left.dims(),
                    right.dims()
                )));
            }
            Ok(SubjectRecord {
                id: r.id.clone(),
                left,
                right,
                label: r.label,
                time: r.time,
                event: r.event,
                severity: None,
                clinical: r.clinical.clone(),
            })
        })
        .collect()
}
