mod cnn;
mod cox;
mod data;
mod eval;

use std::path::{Path, PathBuf};

use hippoprog::pipeline::{read_manifest, ManifestRow};
use hippoprog::Error;

use crate::error::CliError;

pub use cnn::{extract, relevance, train_cnn};
pub use cox::{fit_cox, predict, FitCoxArgs};
pub use data::gen_data;
pub use eval::{evaluate, stratify};

/// Manifest rows in `subject_id` order, which fixes output ordering.
fn sorted_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let mut rows = read_manifest(path)?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(rows)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(Error::Io {
            path: dir.into(),
            source: e,
        })
    })
}

/// `<path><suffix>`, e.g. `model.hpnet` + `.log.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
