//! Mini-batch SGD training with periodic checkpoint evaluation.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::augment::{directions_26, translate};
use crate::error::{Error, Result};
use crate::layers::{softmax, Mode};
use crate::metrics::binary_roc_auc;
use crate::network::forward::{forward_batch, train_step};
use crate::network::params::NetworkParams;
use crate::network::AD_CLASS;
use crate::pipeline::normalize_intensity;
use crate::tensor::Tensor4;

pub use crate::data::LabeledPair;

/// Optimizer and sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub base_lr: f64,
    pub momentum: f64,
    pub step_size: usize,
    pub gamma: f64,
    pub max_iters: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Draw each training sample from its original or one of its 26
    /// translated copies (uniformly over the 27 variants).
    pub augment: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            base_lr: 0.01,
            momentum: 0.9,
            step_size: 20_000,
            gamma: 0.1,
            max_iters: 100_000,
            batch_size: 32,
            seed: 0,
            augment: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.base_lr > 0.0
            && self.momentum > 0.0
            && self.step_size > 0
            && self.gamma > 0.0
            && self.gamma < 1.0
            && self.max_iters > 0;
        if !ok {
            return Err(Error::Config(format!("invalid training schedule {self:?}")));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2 for batch normalization".into()));
        }
        Ok(())
    }
}

/// Step learning-rate policy: `base_lr * gamma^floor(step / step_size)`.
pub fn lr_at_step(schedule: &TrainSchedule, step: usize) -> f64 {
    let k = (step / schedule.step_size) as i32;
    schedule.base_lr * schedule.gamma.powi(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Number of completed iterations.
    pub step: usize,
    pub eval_auc: f64,
    pub params: NetworkParams<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// Zero-based iteration index.
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    /// Evaluation AUC after this iteration, when a checkpoint was taken.
    pub eval_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoints: Vec<Checkpoint>,
    pub log: Vec<LogEntry>,
}

fn prepare(pair: &LabeledPair, offset: Option<[i32; 3]>) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
    let side = |v| -> Result<Tensor4<f32>> {
        let v = match offset {
            Some(o) => translate(v, o)?,
            None => v.clone(),
        };
        Ok(normalize_intensity(&v)?.to_tensor())
    };
    Ok((side(&pair.left)?, side(&pair.right)?))
}

/// P(AD) for each pair under infer mode, evaluated in chunks.
pub fn predict_ad_probability(params: &NetworkParams<f32>, pairs: &[LabeledPair]) -> Result<Vec<f64>> {
    const CHUNK: usize = 16;
    let mut rng = Xoshiro256StarStar::seed_from_u64(0);
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(CHUNK) {
        let mut left = Vec::with_capacity(chunk.len());
        let mut right = Vec::with_capacity(chunk.len());
        for p in chunk {
            let (l, r) = prepare(p, None)?;
            left.push(l);
            right.push(r);
        }
        let fwd = forward_batch(params, left, right, Mode::Infer, &mut rng)?;
        for l in fwd.logits {
            let l: Vec<f64> = l.iter().map(|&v| v as f64).collect();
            out.push(softmax(&l)[AD_CLASS]);
        }
    }
    Ok(out)
}

fn eval_auc(params: &NetworkParams<f32>, eval_set: &[LabeledPair]) -> Result<f64> {
    let scores = predict_ad_probability(params, eval_set)?;
    let labels: Vec<bool> = eval_set.iter().map(|p| p.label == AD_CLASS).collect();
    Ok(binary_roc_auc(&scores, &labels)?.auc)
}

/// Trains `params` in place of a copy and returns checkpoints taken every
/// `eval_every` iterations (and after the final one), each scored by the AUC
/// of P(AD) on `eval_set`.
///
/// Each iteration draws `batch_size` samples with replacement, alternating
/// NC and AD so every batch is class-balanced; all randomness (sampling,
/// translation offsets, dropout) comes from one generator seeded by
/// `schedule.seed`.
pub fn train(
    params: &NetworkParams<f32>,
    dataset: &[LabeledPair],
    schedule: &TrainSchedule,
    eval_set: &[LabeledPair],
    eval_every: usize,
) -> Result<TrainOutcome> {
    schedule.validate()?;
    if eval_every == 0 {
        return Err(Error::Config("eval_every must be positive".into()));
    }
    let by_class: [Vec<usize>; 2] = [0, 1].map(|c| {
        dataset
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == c)
            .map(|(i, _)| i)
            .collect()
    });
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::precondition("training set must contain both NC and AD subjects"));
    }
    if dataset.iter().any(|p| p.label > 1) {
        return Err(Error::precondition("training labels must be 0 (NC) or 1 (AD)"));
    }
    let eval_classes = [0, 1].map(|c| eval_set.iter().filter(|p| p.label == c).count());
    if eval_classes.contains(&0) {
        return Err(Error::precondition(
            "evaluation set must contain both NC and AD subjects",
        ));
    }

    let dirs = directions_26();
    let mut rng = Xoshiro256StarStar::seed_from_u64(schedule.seed);
    let mut params = params.clone();
    let mut velocity = params.zeros_like();
    let mut log = Vec::with_capacity(schedule.max_iters);
    let mut checkpoints = Vec::new();

    for step in 0..schedule.max_iters {
        let lr = lr_at_step(schedule, step);
        let mut left = Vec::with_capacity(schedule.batch_size);
        let mut right = Vec::with_capacity(schedule.batch_size);
        let mut labels = Vec::with_capacity(schedule.batch_size);
        for b in 0..schedule.batch_size {
            let class = b % 2;
            let pool = &by_class[class];
            let idx = pool[rng.random_range(0..pool.len())];
            let offset = if schedule.augment {
                let v = rng.random_range(0..=dirs.len());
                (v > 0).then(|| dirs[v - 1])
            } else {
                None
            };
            let (l, r) = prepare(&dataset[idx], offset)?;
            left.push(l);
            right.push(r);
            labels.push(class);
        }
        let loss = train_step(
            &mut params,
            &mut velocity,
            left,
            right,
            &labels,
            lr,
            schedule.momentum,
            &mut rng,
        )
        .map_err(|e| match e {
            Error::TrainingAborted(m) => Error::TrainingAborted(format!("iteration {step}: {m}")),
            other => other,
        })?;
        let done = step + 1;
        let mut entry = LogEntry {
            step,
            lr,
            loss,
            eval_auc: None,
        };
        if done % eval_every == 0 || done == schedule.max_iters {
            let auc = eval_auc(&params, eval_set)?;
            entry.eval_auc = Some(auc);
            checkpoints.push(Checkpoint {
                step: done,
                eval_auc: auc,
                params: params.clone(),
            });
        }
        log.push(entry);
    }
    Ok(TrainOutcome { checkpoints, log })
}

/// Checkpoint with the highest finite evaluation AUC; ties go to the earliest.
pub fn select_checkpoint(checkpoints: &[Checkpoint]) -> Result<&Checkpoint> {
    let mut best: Option<&Checkpoint> = None;
    for c in checkpoints.iter().filter(|c| c.eval_auc.is_finite()) {
        if best.is_none_or(|b| c.eval_auc > b.eval_auc) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::precondition("no checkpoint with a finite evaluation AUC"))
}
