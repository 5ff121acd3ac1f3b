//! Seeded synthetic cohort with a planted severity signal.
//!
//! Each subject has a latent severity `s` in `[0, 1]`. Both hippocampal
//! volumes are a smooth ellipsoid template whose anterior third is dimmed by
//! `s * atrophy`, plus Gaussian noise. Progression times are exponential with
//! hazard `lambda0 * exp(theta * s)`, so a Cox model on `s` is correctly
//! specified and ranking subjects by `s` is the best possible predictor.
//!
//! Randomness: subject `i` draws from its own xoshiro256** stream, obtained
//! by seeding one generator from the master seed (SplitMix64 expansion) and
//! applying the 2^128-step `jump` `i` times. Within a stream the draw order
//! is: severity, event-time uniform, censoring time, left-volume noise,
//! right-volume noise, clinical covariates.

mod config;
mod template;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use crate::data::{Label, SubjectRecord};
use crate::error::Result;
use crate::metrics::{concordance_index, TieRule};
use crate::tensor::Volume;

pub use config::{ClassCounts, GenConfig};
pub use template::{anterior_bump, bump_mask, template_shape};

/// Follow-up visits happen every this many months.
pub const VISIT_INTERVAL: f64 = 6.0;

/// A generated subject with its latent quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub record: SubjectRecord,
    pub severity: f64,
    /// Uncensored progression time (months).
    pub latent_time: f64,
    pub censor_time: f64,
}

/// Rounds a time up to the next visit (at least one visit).
pub fn to_visit_grid(t: f64) -> f64 {
    ((t / VISIT_INTERVAL).ceil() * VISIT_INTERVAL).max(VISIT_INTERVAL)
}

fn subject_streams(seed: u64, n: usize) -> Vec<Xoshiro256StarStar> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(rng.clone());
        rng.jump();
    }
    out
}

/// Labels in subject order: either from the class quotas (NC, then AD, then
/// MCI) or, without quotas, decided by where the drawn severity falls.
fn planned_labels(cfg: &GenConfig) -> Vec<Option<Label>> {
    match cfg.counts {
        Some(c) => std::iter::repeat_n(Some(Label::Nc), c.nc)
            .chain(std::iter::repeat_n(Some(Label::Ad), c.ad))
            .chain(std::iter::repeat_n(Some(Label::Mci), c.mci))
            .collect(),
        None => vec![None; cfg.n],
    }
}

fn noisy_volume(shape: &[f32], bump: &[f32], cfg: &GenConfig, s: f64, rng: &mut Xoshiro256StarStar) -> Result<Volume> {
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise std");
    let base = cfg.base_intensity;
    let depth = s * cfg.atrophy;
    let voxels = shape
        .iter()
        .zip(bump)
        .map(|(&t, &a)| (base * t as f64 - depth * a as f64 + noise.sample(rng)) as f32)
        .collect();
    Volume::new(cfg.dims, voxels)
}

fn clinical(s: f64, rng: &mut Xoshiro256StarStar) -> BTreeMap<String, f64> {
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let age = (73.0 + 7.0 * z()).clamp(55.0, 95.0);
    let education = (16.0 + 3.0 * z()).round().clamp(6.0, 22.0);
    let adas13 = (8.0 + 24.0 * s + 4.0 * z()).max(0.0);
    let ravlt_immediate = (48.0 - 22.0 * s + 6.0 * z()).max(0.0);
    let ravlt_learning = (6.5 - 4.5 * s + 1.5 * z()).max(0.0);
    let faq = (12.0 * s * s + 2.0 * z()).max(0.0).round();
    let mmse = (29.5 - 6.0 * s + 1.2 * z()).round().clamp(0.0, 30.0);
    let csf_abeta42 = (240.0 - 120.0 * s + 25.0 * z()).max(50.0);
    let suvr = 0.98 + 0.35 * s + 0.06 * z();
    let mut u = || -> f64 { rng.random::<f64>() };
    let sex = if u() < 0.5 { 1.0 } else { 0.0 };
    let p4 = 0.15 + 0.5 * s;
    let apoe4 = (0..2).filter(|_| u() < p4).count() as f64;
    [
        ("age", age),
        ("sex", sex),
        ("education", education),
        ("apoe4", apoe4),
        ("adas13", adas13),
        ("ravlt_immediate", ravlt_immediate),
        ("ravlt_learning", ravlt_learning),
        ("faq", faq),
        ("mmse", mmse),
        ("csf_abeta42", csf_abeta42),
        ("suvr", suvr),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Generates the cohort. Deterministic in `cfg` (including the seed) and
/// independent of the thread count.
pub fn generate(cfg: &GenConfig) -> Result<Vec<SyntheticSubject>> {
    cfg.validate()?;
    let labels = planned_labels(cfg);
    let n = labels.len();
    let shape = template_shape(cfg.dims);
    let bump = anterior_bump(cfg.dims);
    let width = n.max(1).to_string().len().max(4);
    let streams = subject_streams(cfg.seed, n);
    streams
        .into_par_iter()
        .zip(labels.into_par_iter())
        .enumerate()
        .map(|(i, (mut rng, planned))| {
            let u: f64 = rng.random();
            let (s, label) = match planned {
                Some(l) => {
                    let (lo, hi) = cfg.severity_range(l);
                    (lo + (hi - lo) * u, l)
                }
                None => (u, cfg.label_for(u)),
            };
            let ut: f64 = 1.0 - rng.random::<f64>(); // in (0, 1]
            let latent_time = -ut.ln() / (cfg.lambda0 * (cfg.theta * s).exp());
            let censor_time = rng.random_range(cfg.censor_window.0..=cfg.censor_window.1);
            let event = latent_time <= censor_time;
            let time = to_visit_grid(latent_time.min(censor_time));
            let left = noisy_volume(&shape, &bump, cfg, s, &mut rng)?;
            let right = noisy_volume(&shape, &bump, cfg, s, &mut rng)?;
            let clinical = clinical(s, &mut rng);
            Ok(SyntheticSubject {
                record: SubjectRecord {
                    id: format!("SUBJ{:0width$}", i + 1),
                    left,
                    right,
                    label,
                    time: Some(time),
                    event: Some(event),
                    severity: Some(s),
                    clinical,
                },
                severity: s,
                latent_time,
                censor_time,
            })
        })
        .collect()
}

/// C-index of the true severity as the risk marker: the ceiling for any
/// learned predictor on these subjects.
pub fn oracle_c_index(subjects: &[SyntheticSubject], rule: TieRule) -> Result<f64> {
    let risks: Vec<f64> = subjects.iter().map(|s| s.severity).collect();
    let times: Vec<f64> = subjects
        .iter()
        .map(|s| s.record.time.unwrap_or(s.latent_time))
        .collect();
    let events: Vec<bool> = subjects.iter().map(|s| s.record.event.unwrap_or(true)).collect();
    Ok(concordance_index(&risks, &times, &events, rule)?.c_index)
}
