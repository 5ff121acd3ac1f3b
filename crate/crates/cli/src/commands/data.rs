use std::path::{Path, PathBuf};

use hippoprog::data::Label;
use hippoprog::metrics::TieRule;
use hippoprog::pipeline::{fmt_num, write_csv, write_manifest, write_volume, ManifestRow};
use hippoprog::synth::{generate, oracle_c_index, GenConfig, SyntheticSubject};

use super::create_dir;
use crate::error::CliError;
use crate::settings::Settings;
use crate::Common;

pub fn gen_data(common: &Common, out: &Path) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    let cfg = GenConfig::from_kv(&settings.kv)?;
    let subjects = generate(&cfg)?;

    let vol_dir = out.join("volumes");
    create_dir(&vol_dir)?;
    let mut rows = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let r = &s.record;
        let left = PathBuf::from("volumes").join(format!("{}_left.vol3", r.id));
        let right = PathBuf::from("volumes").join(format!("{}_right.vol3", r.id));
        write_volume(&r.left, &out.join(&left))?;
        write_volume(&r.right, &out.join(&right))?;
        rows.push(ManifestRow {
            id: r.id.clone(),
            left_path: left,
            right_path: right,
            label: r.label,
            time: r.time,
            event: r.event,
            clinical: r.clinical.clone(),
        });
    }
    write_manifest(&rows, &out.join("manifest.csv"))?;
    let truth: Vec<Vec<String>> = subjects
        .iter()
        .map(|s| {
            vec![
                s.record.id.clone(),
                fmt_num(s.severity),
                fmt_num(s.latent_time),
                fmt_num(s.censor_time),
            ]
        })
        .collect();
    write_csv(
        &out.join("truth.csv"),
        &["subject_id", "severity", "latent_time", "censor_time"],
        &truth,
    )?;

    let count = |l: Label| subjects.iter().filter(|s| s.record.label == l).count();
    let events = subjects.iter().filter(|s| s.record.event == Some(true)).count();
    println!(
        "subjects={} nc={} ad={} mci={} events={events}",
        subjects.len(),
        count(Label::Nc),
        count(Label::Ad),
        count(Label::Mci)
    );
    println!("oracle_c_index={:.6}", oracle_c_index(&subjects, TieRule::Strict)?);
    let mci: Vec<SyntheticSubject> = subjects.into_iter().filter(|s| s.record.label == Label::Mci).collect();
    if let Ok(c) = oracle_c_index(&mci, TieRule::Strict) {
        println!("oracle_c_index_mci={c:.6}");
    }
    Ok(())
}
