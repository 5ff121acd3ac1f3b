use std::path::{Path, PathBuf};

use hippoprog::data::Label;
use hippoprog::network::{
    build_network, extract_features, load_model, parse_scale, relevance_map, save_model, select_checkpoint, train,
    NetConfig, NetworkParams, TrainSchedule,
};
use hippoprog::pipeline::{fmt_num, load_records, normalize_intensity, write_csv, write_volume};
use hippoprog::{Error, LabeledPair, SubjectRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use super::{create_dir, sibling, sorted_manifest};
use crate::error::{usage, CliError};
use crate::settings::Settings;
use crate::tables::write_table;
use crate::Common;

/// Stratified hold-out: `fraction` of each class (at least one subject) goes
/// to the evaluation set. Both halves keep manifest order.
fn split_eval(
    pairs: Vec<LabeledPair>,
    fraction: f64,
    rng: &mut Xoshiro256StarStar,
) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    let mut is_eval = vec![false; pairs.len()];
    for class in 0..2 {
        let mut idx: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label == class).collect();
        idx.shuffle(rng);
        let k = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len().saturating_sub(1).max(1));
        for &i in &idx[..k.min(idx.len())] {
            is_eval[i] = true;
        }
    }
    let mut train_set = Vec::new();
    let mut eval_set = Vec::new();
    for (p, e) in pairs.into_iter().zip(is_eval) {
        if e {
            eval_set.push(p);
        } else {
            train_set.push(p);
        }
    }
    (train_set, eval_set)
}

pub fn train_cnn(
    common: &Common,
    manifest: &Path,
    out: &Path,
    scale: Option<&str>,
    log: Option<PathBuf>,
) -> Result<(), CliError> {
    let settings = Settings::load(common)?;
    let scale = parse_scale(settings.text(scale, "scale").unwrap_or("1"))?;
    let defaults = TrainSchedule::default();
    let schedule = TrainSchedule {
        base_lr: settings.get("base_lr", defaults.base_lr)?,
        momentum: settings.get("momentum", defaults.momentum)?,
        step_size: settings.get("step_size", defaults.step_size)?,
        gamma: settings.get("gamma", defaults.gamma)?,
        max_iters: settings.get("max_iters", defaults.max_iters)?,
        batch_size: settings.get("batch_size", defaults.batch_size)?,
        seed: settings.seed,
        augment: settings.get("augment", defaults.augment)?,
    };
    let eval_every: usize = settings.get("eval_every", 2000)?;
    let eval_fraction: f64 = settings.get("eval_fraction", 0.2)?;
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(usage(format!("eval_fraction must be in (0, 1), got {eval_fraction}")));
    }

    // MCI rows are never classifier targets
    let rows: Vec<_> = sorted_manifest(manifest)?
        .into_iter()
        .filter(|r| r.label != Label::Mci)
        .collect();
    if rows.is_empty() {
        return Err(CliError::Core(Error::Precondition(format!(
            "{}: no NC or AD rows to train on",
            manifest.display()
        ))));
    }
    let records = load_records(&rows)?;
    let pairs = records
        .iter()
        .map(SubjectRecord::to_labeled)
        .collect::<Result<Vec<_>, _>>()?;
    let dims = pairs[0].left.dims();

    let config = NetConfig {
        input_dims: dims,
        ..NetConfig::scaled(scale)
    };
    let mut init_rng = Xoshiro256StarStar::seed_from_u64(settings.seed);
    init_rng.jump();
    let mut split_rng = init_rng.clone();
    split_rng.jump();
    let params: NetworkParams<f32> = build_network(&config, &mut init_rng)?;
    let (train_set, eval_set) = split_eval(pairs, eval_fraction, &mut split_rng);

    let outcome = train(&params, &train_set, &schedule, &eval_set, eval_every)?;
    let best = select_checkpoint(&outcome.checkpoints)?;
    save_model(&best.params, out)?;

    let log_rows: Vec<Vec<String>> = outcome
        .log
        .iter()
        .map(|e| {
            vec![
                e.step.to_string(),
                fmt_num(e.lr),
                fmt_num(e.loss),
                e.eval_auc.map(fmt_num).unwrap_or_default(),
            ]
        })
        .collect();
    let log = log.unwrap_or_else(|| sibling(out, ".log.csv"));
    write_csv(&log, &["step", "lr", "loss", "eval_auc"], &log_rows)?;
    println!(
        "train={} eval={} feature_dim={} selected_step={} eval_auc={:.6}",
        train_set.len(),
        eval_set.len(),
        config.feature_dim(),
        best.step,
        best.eval_auc
    );
    Ok(())
}

fn check_dims(params: &NetworkParams<f32>, r: &SubjectRecord) -> Result<(), CliError> {
    if r.left.dims() != params.config.input_dims {
        return Err(CliError::Core(Error::Shape(format!(
            "subject {}: volume dims {} differ from model input dims {}",
            r.id,
            r.left.dims(),
            params.config.input_dims
        ))));
    }
    Ok(())
}

pub fn extract(common: &Common, manifest: &Path, model: &Path, out: &Path) -> Result<(), CliError> {
    Settings::load(common)?;
    let params = load_model(model)?;
    let rows = sorted_manifest(manifest)?;
    let records = load_records(&rows)?;
    let mut table = Vec::with_capacity(records.len());
    for r in &records {
        check_dims(&params, r)?;
        let f = extract_features(
            &params,
            &r.id,
            &normalize_intensity(&r.left)?,
            &normalize_intensity(&r.right)?,
        )?;
        table.push((r.id.clone(), f.values.iter().map(|&v| v as f64).collect()));
    }
    let columns: Vec<String> = (1..=params.feature_dim()).map(|k| format!("f{k}")).collect();
    write_table(out, &columns, &table)?;
    println!("subjects={} feature_dim={}", table.len(), columns.len());
    Ok(())
}

pub fn relevance(
    common: &Common,
    manifest: &Path,
    model: &Path,
    class: &str,
    subjects: &[String],
    out: &Path,
) -> Result<(), CliError> {
    Settings::load(common)?;
    let class = match class.parse::<Label>() {
        Ok(l) => l
            .class_index()
            .ok_or_else(|| usage("relevance maps exist for the NC and AD outputs only"))?,
        Err(e) => return Err(usage(e.to_string())),
    };
    let params = load_model(model)?;
    let mut rows = sorted_manifest(manifest)?;
    if !subjects.is_empty() {
        if let Some(missing) = subjects.iter().find(|s| !rows.iter().any(|r| &r.id == *s)) {
            return Err(usage(format!("subject '{missing}' is not in the manifest")));
        }
        rows.retain(|r| subjects.contains(&r.id));
    }
    create_dir(out)?;
    let records = load_records(&rows)?;
    for r in &records {
        check_dims(&params, r)?;
        let [l, rt] = relevance_map(
            &params,
            &normalize_intensity(&r.left)?,
            &normalize_intensity(&r.right)?,
            class,
        )?;
        write_volume(&l, &out.join(format!("{}_left.vol3", r.id)))?;
        write_volume(&rt, &out.join(format!("{}_right.vol3", r.id)))?;
    }
    println!("maps={}", 2 * records.len());
    Ok(())
}
