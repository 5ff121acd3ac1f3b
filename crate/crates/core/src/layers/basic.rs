//! ReLU, global average pooling, fully connected and dropout layers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::reduce;
use crate::layers::Mode;
use crate::tensor::{Dims3, Scalar, Tensor4};

pub fn relu<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given its forward output.
pub fn relu_backward<T: Scalar>(output: &Tensor4<T>, upstream: &Tensor4<T>) -> Result<Tensor4<T>> {
    if !output.same_shape(upstream) {
        return Err(Error::shape("relu_backward: shape mismatch"));
    }
    let mut g = upstream.clone();
    for (gv, &o) in g.values_mut().iter_mut().zip(output.values()) {
        if o <= T::zero() {
            *gv = T::zero();
        }
    }
    Ok(g)
}

/// Per-channel spatial mean.
pub fn gap<T: Scalar>(input: &Tensor4<T>) -> Vec<T> {
    let n = input.spatial().len() as f64;
    (0..input.channels())
        .map(|c| T::from_f64(reduce::sum(input.channel(c)) / n))
        .collect()
}

pub fn gap_backward<T: Scalar>(channels: usize, spatial: Dims3, upstream: &[T]) -> Result<Tensor4<T>> {
    if upstream.len() != channels {
        return Err(Error::shape("gap_backward: upstream length != channels"));
    }
    let n = spatial.len() as f64;
    let mut g = Tensor4::zeros(channels, spatial);
    for (c, &u) in upstream.iter().enumerate() {
        g.channel_mut(c).fill(T::from_f64(u.as_f64() / n));
    }
    Ok(g)
}

/// Dense layer `y = W x + b` with `W` stored row-major as `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams<T> {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> FcParams<T> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        FcParams {
            out_dim,
            in_dim,
            weights: vec![T::zero(); out_dim * in_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.out_dim * self.in_dim || self.bias.len() != self.out_dim {
            return Err(Error::shape("fully_connected: parameter shapes inconsistent"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Vec<T>,
}

pub fn fully_connected<T: Scalar>(input: &[T], params: &FcParams<T>) -> Result<Vec<T>> {
    params.validate()?;
    if input.len() != params.in_dim {
        return Err(Error::shape(format!(
            "fully_connected: input length {} != weight columns {}",
            input.len(),
            params.in_dim
        )));
    }
    Ok((0..params.out_dim)
        .map(|r| {
            let s: f64 = params
                .row(r)
                .iter()
                .zip(input)
                .map(|(w, x)| w.as_f64() * x.as_f64())
                .sum();
            T::from_f64(s + params.bias[r].as_f64())
        })
        .collect())
}

pub fn fully_connected_backward<T: Scalar>(input: &[T], params: &FcParams<T>, upstream: &[T]) -> Result<FcGrads<T>> {
    params.validate()?;
    if input.len() != params.in_dim || upstream.len() != params.out_dim {
        return Err(Error::shape("fully_connected_backward: shape mismatch"));
    }
    let mut weights = vec![T::zero(); params.weights.len()];
    for (r, &u) in upstream.iter().enumerate() {
        for (w, &x) in weights[r * params.in_dim..(r + 1) * params.in_dim]
            .iter_mut()
            .zip(input)
        {
            *w = u * x;
        }
    }
    let grad_in = (0..params.in_dim)
        .map(|c| {
            let s: f64 = (0..params.out_dim)
                .map(|r| params.weights[r * params.in_dim + c].as_f64() * upstream[r].as_f64())
                .sum();
            T::from_f64(s)
        })
        .collect();
    Ok(FcGrads {
        weights,
        bias: upstream.to_vec(),
        input: grad_in,
    })
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (`0` or `1 / (1 - ratio)`) needed by the backward pass; infer mode is the
/// identity with a mask of ones.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    input: &[T],
    ratio: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::precondition(format!("dropout ratio {ratio} outside [0, 1)")));
    }
    match mode {
        Mode::Infer => Ok((input.to_vec(), vec![T::one(); input.len()])),
        Mode::Train => {
            let keep = T::from_f64(1.0 / (1.0 - ratio));
            let mask: Vec<T> = input
                .iter()
                .map(|_| if rng.random::<f64>() < ratio { T::zero() } else { keep })
                .collect();
            let out = input.iter().zip(&mask).map(|(&x, &m)| x * m).collect();
            Ok((out, mask))
        }
    }
}

pub fn dropout_backward<T: Scalar>(mask: &[T], upstream: &[T]) -> Result<Vec<T>> {
    if mask.len() != upstream.len() {
        return Err(Error::shape("dropout_backward: shape mismatch"));
    }
    Ok(mask.iter().zip(upstream).map(|(&m, &u)| m * u).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    #[test]
    fn relu_clamps() {
        let t = Tensor4::new(1, Dims3::new(3, 1, 1), vec![-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn gap_of_constant_channel() {
        let mut t = Tensor4::filled(2, Dims3::new(3, 2, 5), 4.5f32);
        t.channel_mut(1).fill(-1.25);
        assert_eq!(gap(&t), vec![4.5, -1.25]);
    }

    #[test]
    fn gap_matches_exhaustive_mean() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(9);
        let d = Dims3::new(7, 5, 3);
        let v: Vec<f64> = (0..2 * d.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = Tensor4::new(2, d, v.clone()).unwrap();
        let g = gap(&t);
        for c in 0..2 {
            let mut s = 0.0;
            for i in 0..d.len() {
                s += v[c * d.len() + i];
            }
            let m = s / d.len() as f64;
            assert!((g[c] - m).abs() <= 1e-6 * m.abs().max(1e-12));
        }
    }

    #[test]
    fn fc_affine_map() {
        let p = FcParams {
            out_dim: 2,
            in_dim: 3,
            weights: vec![1.0, 2.0, 3.0, -1.0, 0.0, 0.5],
            bias: vec![0.5, -0.5],
        };
        let y = fully_connected(&[1.0f64, 1.0, 2.0], &p).unwrap();
        assert_eq!(y, vec![9.5, -0.5]);
        assert!(matches!(fully_connected(&[1.0f64], &p), Err(Error::Shape(_))));
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
        let x = vec![1.0f64; 100_000];
        let (y, _) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let zeros = y.iter().filter(|&&v| v == 0.0).count();
        assert!((zeros as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn dropout_infer_is_identity_and_ratio_checked() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(0);
        let x = vec![0.3f32, -2.0, 7.0];
        let (y, _) = dropout(&x, 0.5, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
        assert!(dropout(&x, -0.1, Mode::Train, &mut rng).is_err());
    }
}
