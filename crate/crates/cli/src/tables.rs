//! CSV tables exchanged between commands.

use std::collections::BTreeMap;
use std::path::Path;

use hippoprog::pipeline::fmt_num;
use hippoprog::Error;

use crate::error::{usage, CliError};

/// Numeric columns keyed by `subject_id`.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => CliError::Core(Error::Io {
                    path: path.into(),
                    source: io,
                }),
                other => usage(format!("{}: {other:?}", path.display())),
            })?;
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("subject_id") {
            return Err(usage(format!("{}: first column must be subject_id", path.display())));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let id = rec.get(0).unwrap_or("").to_string();
            let vals = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        CliError::Core(Error::Parse {
                            offset: line,
                            message: format!("{}: '{f}' is not a number", path.display()),
                        })
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if rows.insert(id.clone(), vals).is_some() {
                return Err(CliError::Core(Error::Parse {
                    offset: line,
                    message: format!("{}: duplicate subject_id '{id}'", path.display()),
                }));
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, id: &str, path: &Path) -> Result<&[f64], CliError> {
        self.rows
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| usage(format!("{}: no row for subject '{id}'", path.display())))
    }
}

/// Header plus formatted rows, with `subject_id` first.
pub fn write_table(path: &Path, columns: &[String], rows: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let mut header = vec!["subject_id"];
    header.extend(columns.iter().map(String::as_str));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(id, v)| {
            std::iter::once(id.clone())
                .chain(v.iter().map(|&x| fmt_num(x)))
                .collect()
        })
        .collect();
    Ok(hippoprog::pipeline::write_csv(path, &header, &body)?)
}
