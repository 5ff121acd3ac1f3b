//! Per-channel batch normalization over (batch x spatial).

use crate::error::{Error, Result};
use crate::layers::reduce;
use crate::tensor::{Scalar, Tensor4};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNormParams<T> {
    /// gamma 1, beta 0, running statistics of a standard normal.
    pub fn identity(channels: usize) -> Self {
        BatchNormParams {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub fn update_running(&mut self, stats: &BatchStats, momentum: f64) {
        for c in 0..self.channels() {
            let m = momentum * self.running_mean[c].as_f64() + (1.0 - momentum) * stats.mean[c];
            let v = momentum * self.running_var[c].as_f64() + (1.0 - momentum) * stats.var[c];
            self.running_mean[c] = T::from_f64(m);
            self.running_var[c] = T::from_f64(v);
        }
    }
}

/// Per-channel batch mean and biased variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Everything the train-mode backward pass needs.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<Tensor4<T>>,
    pub inv_std: Vec<f64>,
    pub stats: BatchStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnGrads<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub input: Vec<Tensor4<T>>,
}

fn check_batch<T: Scalar>(batch: &[Tensor4<T>], params: &BatchNormParams<T>) -> Result<()> {
    let first = batch
        .first()
        .ok_or_else(|| Error::precondition("batch_norm: empty batch"))?;
    if first.channels() != params.channels()
        || params.beta.len() != params.channels()
        || params.running_mean.len() != params.channels()
        || params.running_var.len() != params.channels()
    {
        return Err(Error::shape("batch_norm: channel count mismatch"));
    }
    if batch.iter().any(|t| !t.same_shape(first)) {
        return Err(Error::shape("batch_norm: batch members differ in shape"));
    }
    Ok(())
}

/// Forward pass without touching running statistics. In train mode the cache
/// carries the batch statistics so the caller can update them.
pub fn batch_norm_forward<T: Scalar>(
    batch: &[Tensor4<T>],
    params: &BatchNormParams<T>,
    mode: Mode,
    eps: f64,
) -> Result<(Vec<Tensor4<T>>, Option<BnCache<T>>)> {
    check_batch(batch, params)?;
    if eps <= 0.0 {
        return Err(Error::precondition("batch_norm: epsilon must be positive"));
    }
    let channels = params.channels();
    match mode {
        Mode::Infer => {
            let out = batch
                .iter()
                .map(|t| {
                    let mut o = t.clone();
                    for c in 0..channels {
                        let inv = 1.0 / (params.running_var[c].as_f64() + eps).sqrt();
                        let g = params.gamma[c].as_f64() * inv;
                        let shift = params.beta[c].as_f64() - params.running_mean[c].as_f64() * g;
                        let (g, shift) = (T::from_f64(g), T::from_f64(shift));
                        for v in o.channel_mut(c) {
                            *v = *v * g + shift;
                        }
                    }
                    o
                })
                .collect();
            Ok((out, None))
        }
        Mode::Train => {
            if batch.len() < 2 {
                return Err(Error::precondition(format!(
                    "batch_norm: train mode needs batch size >= 2, got {}",
                    batch.len()
                )));
            }
            let count = (batch.len() * batch[0].spatial().len()) as f64;
            let mut mean = vec![0.0; channels];
            let mut var = vec![0.0; channels];
            for c in 0..channels {
                let s: f64 = batch.iter().map(|t| reduce::sum(t.channel(c))).sum();
                let m = s / count;
                let ss: f64 = batch.iter().map(|t| reduce::sum_sq_dev(t.channel(c), m)).sum();
                mean[c] = m;
                var[c] = ss / count;
            }
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            let mut xhat = Vec::with_capacity(batch.len());
            let mut out = Vec::with_capacity(batch.len());
            for t in batch {
                let mut xh = Vec::with_capacity(t.len());
                let mut o = Vec::with_capacity(t.len());
                for c in 0..channels {
                    let (m, inv) = (T::from_f64(mean[c]), T::from_f64(inv_std[c]));
                    let (g, b) = (params.gamma[c], params.beta[c]);
                    let start = xh.len();
                    xh.extend(t.channel(c).iter().map(|&v| (v - m) * inv));
                    o.extend(xh[start..].iter().map(|&h| h * g + b));
                }
                xhat.push(Tensor4::new(channels, t.spatial(), xh)?);
                out.push(Tensor4::new(channels, t.spatial(), o)?);
            }
            let cache = BnCache {
                xhat,
                inv_std,
                stats: BatchStats { mean, var },
            };
            Ok((out, Some(cache)))
        }
    }
}

/// Forward pass that also folds train-mode batch statistics into the
/// running averages.
pub fn batch_norm<T: Scalar>(
    batch: &[Tensor4<T>],
    params: &mut BatchNormParams<T>,
    mode: Mode,
    momentum: f64,
    eps: f64,
) -> Result<Vec<Tensor4<T>>> {
    let (out, cache) = batch_norm_forward(batch, params, mode, eps)?;
    if let Some(cache) = cache {
        params.update_running(&cache.stats, momentum);
    }
    Ok(out)
}

/// Train-mode backward pass.
pub fn batch_norm_backward<T: Scalar>(cache: &BnCache<T>, gamma: &[T], upstream: &[Tensor4<T>]) -> Result<BnGrads<T>> {
    if upstream.len() != cache.xhat.len() || upstream.iter().zip(&cache.xhat).any(|(u, x)| !u.same_shape(x)) {
        return Err(Error::shape("batch_norm_backward: upstream does not match cache"));
    }
    let channels = gamma.len();
    let count = (upstream.len() * upstream[0].spatial().len()) as f64;
    let mut dgamma = vec![T::zero(); channels];
    let mut dbeta = vec![T::zero(); channels];
    let mut sums = vec![(0.0f64, 0.0f64); channels];
    for c in 0..channels {
        let mut s_dy = 0.0;
        let mut s_dy_xh = 0.0;
        for (u, xh) in upstream.iter().zip(&cache.xhat) {
            s_dy += reduce::sum(u.channel(c));
            s_dy_xh += reduce::dot(u.channel(c), xh.channel(c));
        }
        dgamma[c] = T::from_f64(s_dy_xh);
        dbeta[c] = T::from_f64(s_dy);
        sums[c] = (s_dy, s_dy_xh);
    }
    let mut input = Vec::with_capacity(upstream.len());
    for (u, xh) in upstream.iter().zip(&cache.xhat) {
        let mut g = u.clone();
        for c in 0..channels {
            let (s_dy, s_dy_xh) = sums[c];
            // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
            let scale = T::from_f64(gamma[c].as_f64() * cache.inv_std[c]);
            let mean_dy = T::from_f64(s_dy / count);
            let mean_dy_xh = T::from_f64(s_dy_xh / count);
            for (gv, &h) in g.channel_mut(c).iter_mut().zip(xh.channel(c)) {
                *gv = scale * (*gv - mean_dy - h * mean_dy_xh);
            }
        }
        input.push(g);
    }
    Ok(BnGrads {
        gamma: dgamma,
        beta: dbeta,
        input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims3;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256StarStar;

    fn random_batch(seed: u64, n: usize, c: usize, d: Dims3, scale: f64, shift: f64) -> Vec<Tensor4<f64>> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v = (0..c * d.len())
                    .map(|_| rng.random_range(-1.0..1.0) * scale + shift)
                    .collect();
                Tensor4::new(c, d, v).unwrap()
            })
            .collect()
    }

    fn channel_moments(batch: &[Tensor4<f64>], c: usize) -> (f64, f64) {
        let all: Vec<f64> = batch.iter().flat_map(|t| t.channel(c).to_vec()).collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64;
        (m, v)
    }

    #[test]
    fn train_mode_standardizes() {
        let batch = random_batch(1, 4, 3, Dims3::new(3, 4, 2), 7.0, 12.0);
        let mut p = BatchNormParams::<f64>::identity(3);
        let out = batch_norm(&batch, &mut p, Mode::Train, BN_MOMENTUM, BN_EPSILON).unwrap();
        for c in 0..3 {
            let (m, v) = channel_moments(&out, c);
            assert!(m.abs() < 1e-3);
            assert!((v - 1.0).abs() < 1e-3);
        }
        // running stats moved 10% of the way towards the batch stats
        let (bm, _) = channel_moments(&batch, 0);
        assert!((p.running_mean[0] - 0.1 * bm).abs() < 1e-9);
    }

    #[test]
    fn affine_law_on_normalized_data() {
        let raw = random_batch(2, 3, 1, Dims3::new(4, 4, 4), 1.0, 0.0);
        let mut p = BatchNormParams::<f64>::identity(1);
        let normed = batch_norm(&raw, &mut p, Mode::Train, BN_MOMENTUM, BN_EPSILON).unwrap();
        let mut p2 = BatchNormParams::<f64>::identity(1);
        p2.gamma[0] = 2.0;
        p2.beta[0] = 5.0;
        let out = batch_norm(&normed, &mut p2, Mode::Train, BN_MOMENTUM, BN_EPSILON).unwrap();
        let (m, v) = channel_moments(&out, 0);
        assert!((m - 5.0).abs() < 1e-3);
        assert!((v.sqrt() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn infer_mode_matches_scalar_formula() {
        let d = Dims3::new(2, 1, 1);
        let x = Tensor4::new(2, d, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let p = BatchNormParams {
            gamma: vec![1.5, -0.5],
            beta: vec![0.25, 2.0],
            running_mean: vec![0.3, -1.0],
            running_var: vec![2.0, 0.04],
        };
        let (out, cache) = batch_norm_forward(&[x], &p, Mode::Infer, BN_EPSILON).unwrap();
        assert!(cache.is_none());
        // (x - mu) / sqrt(var + eps) * gamma + beta, evaluated independently:
        let expected = [
            0.9924602640975347,
            -2.1895122963204714,
            -1.7495313378723187,
            -7.998750234326183,
        ];
        for (a, e) in out[0].values().iter().zip(expected) {
            let e: f64 = e;
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn train_mode_rejects_singleton_batch() {
        let batch = random_batch(3, 1, 1, Dims3::new(2, 2, 2), 1.0, 0.0);
        let p = BatchNormParams::<f64>::identity(1);
        assert!(matches!(
            batch_norm_forward(&batch, &p, Mode::Train, BN_EPSILON),
            Err(Error::Precondition(_))
        ));
        assert!(batch_norm_forward(&batch, &p, Mode::Infer, BN_EPSILON).is_ok());
    }
}
