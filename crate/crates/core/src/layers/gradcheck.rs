//! Central-difference verification of the analytic backward passes.
//!
//! Each layer output is reduced to a scalar `L = sum_i r_i * y_i` with a fixed
//! pseudo-random projection `r`, so every output element contributes to the
//! checked gradient. The softmax loss is already scalar and is used directly.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::layers::{
    basic, batch_norm_backward, batch_norm_forward, conv3d, conv3d_backward, maxpool3d, maxpool3d_backward,
    softmax_cross_entropy, BatchNormParams, ConvGeometry, ConvKernels, FcParams, Mode, BN_EPSILON,
};
use crate::tensor::Tensor4;

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-4;

/// Magnitude below which errors are measured absolutely rather than relative
/// to the gradient component.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// A layer instance, with its parameters, in 64-bit precision.
#[derive(Debug, Clone)]
pub enum LayerSpec {
    Conv3d {
        kernels: ConvKernels<f64>,
        bias: Vec<f64>,
        geometry: ConvGeometry,
    },
    MaxPool,
    BatchNormTrain {
        gamma: Vec<f64>,
        beta: Vec<f64>,
    },
    Relu,
    Gap,
    FullyConnected(FcParams<f64>),
    SoftmaxCrossEntropy {
        label: usize,
    },
}

#[derive(Debug, Clone)]
pub enum LayerInput {
    Tensor(Tensor4<f64>),
    Batch(Vec<Tensor4<f64>>),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub layer: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_coordinate: String,
    pub tolerance: f64,
    pub passed: bool,
}

impl LayerSpec {
    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::MaxPool => "maxpool3d",
            LayerSpec::BatchNormTrain { .. } => "batch_norm",
            LayerSpec::Relu => "relu",
            LayerSpec::Gap => "gap",
            LayerSpec::FullyConnected(_) => "fully_connected",
            LayerSpec::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            LayerSpec::Conv3d { kernels, bias, .. } => kernels.weights.iter().chain(bias).copied().collect(),
            LayerSpec::BatchNormTrain { gamma, beta } => gamma.iter().chain(beta).copied().collect(),
            LayerSpec::FullyConnected(p) => p.weights.iter().chain(&p.bias).copied().collect(),
            _ => Vec::new(),
        }
    }

    fn with_params(&self, flat: &[f64]) -> LayerSpec {
        let mut out = self.clone();
        match &mut out {
            LayerSpec::Conv3d { kernels, bias, .. } => {
                let n = kernels.weights.len();
                kernels.weights.copy_from_slice(&flat[..n]);
                bias.copy_from_slice(&flat[n..]);
            }
            LayerSpec::BatchNormTrain { gamma, beta } => {
                let n = gamma.len();
                gamma.copy_from_slice(&flat[..n]);
                beta.copy_from_slice(&flat[n..]);
            }
            LayerSpec::FullyConnected(p) => {
                let n = p.weights.len();
                p.weights.copy_from_slice(&flat[..n]);
                p.bias.copy_from_slice(&flat[n..]);
            }
            _ => {}
        }
        out
    }
}

impl LayerInput {
    fn flat(&self) -> Vec<f64> {
        match self {
            LayerInput::Tensor(t) => t.values().to_vec(),
            LayerInput::Batch(b) => b.iter().flat_map(|t| t.values().to_vec()).collect(),
            LayerInput::Vector(v) => v.clone(),
        }
    }

    fn with_flat(&self, flat: &[f64]) -> LayerInput {
        match self {
            LayerInput::Tensor(t) => {
                LayerInput::Tensor(Tensor4::new(t.channels(), t.spatial(), flat.to_vec()).unwrap())
            }
            LayerInput::Batch(b) => {
                let mut off = 0;
                LayerInput::Batch(
                    b.iter()
                        .map(|t| {
                            let n = t.len();
                            let v = flat[off..off + n].to_vec();
                            off += n;
                            Tensor4::new(t.channels(), t.spatial(), v).unwrap()
                        })
                        .collect(),
                )
            }
            LayerInput::Vector(_) => LayerInput::Vector(flat.to_vec()),
        }
    }
}

fn tensor_input<'a>(layer: &LayerSpec, input: &'a LayerInput) -> Result<&'a Tensor4<f64>> {
    match input {
        LayerInput::Tensor(t) => Ok(t),
        _ => Err(Error::precondition(format!("{} expects a tensor input", layer.name()))),
    }
}

fn vector_input<'a>(layer: &LayerSpec, input: &'a LayerInput) -> Result<&'a [f64]> {
    match input {
        LayerInput::Vector(v) => Ok(v),
        _ => Err(Error::precondition(format!("{} expects a vector input", layer.name()))),
    }
}

fn bn_params(gamma: &[f64], beta: &[f64]) -> BatchNormParams<f64> {
    let mut p = BatchNormParams::identity(gamma.len());
    p.gamma = gamma.to_vec();
    p.beta = beta.to_vec();
    p
}

/// Flattened forward output of the layer.
fn forward(layer: &LayerSpec, input: &LayerInput) -> Result<Vec<f64>> {
    Ok(match layer {
        LayerSpec::Conv3d {
            kernels,
            bias,
            geometry,
        } => conv3d(tensor_input(layer, input)?, kernels, bias, *geometry)?.into_values(),
        LayerSpec::MaxPool => maxpool3d(tensor_input(layer, input)?)?.0.into_values(),
        LayerSpec::Relu => basic::relu(tensor_input(layer, input)?).into_values(),
        LayerSpec::Gap => basic::gap(tensor_input(layer, input)?),
        LayerSpec::BatchNormTrain { gamma, beta } => {
            let LayerInput::Batch(b) = input else {
                return Err(Error::precondition("batch_norm expects a batch input"));
            };
            let (out, _) = batch_norm_forward(b, &bn_params(gamma, beta), Mode::Train, BN_EPSILON)?;
            out.into_iter().flat_map(|t| t.into_values()).collect()
        }
        LayerSpec::FullyConnected(p) => basic::fully_connected(vector_input(layer, input)?, p)?,
        LayerSpec::SoftmaxCrossEntropy { label } => {
            vec![softmax_cross_entropy(vector_input(layer, input)?, *label)?.0]
        }
    })
}

fn reshape_like(t: &Tensor4<f64>, flat: &[f64]) -> Tensor4<f64> {
    Tensor4::new(t.channels(), t.spatial(), flat.to_vec()).unwrap()
}

/// Analytic `(dL/dparams, dL/dinput)` for upstream gradient `r`.
fn analytic(layer: &LayerSpec, input: &LayerInput, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(match layer {
        LayerSpec::Conv3d {
            kernels,
            bias,
            geometry,
        } => {
            let x = tensor_input(layer, input)?;
            let out = conv3d(x, kernels, bias, *geometry)?;
            let g = conv3d_backward(x, kernels, *geometry, &reshape_like(&out, r))?;
            let p = g.kernels.into_iter().chain(g.bias).collect();
            (p, g.input.expect("input gradient requested").into_values())
        }
        LayerSpec::MaxPool => {
            let x = tensor_input(layer, input)?;
            let (out, arg) = maxpool3d(x)?;
            let g = maxpool3d_backward(x.channels(), x.spatial(), &arg, &reshape_like(&out, r))?;
            (Vec::new(), g.into_values())
        }
        LayerSpec::Relu => {
            let x = tensor_input(layer, input)?;
            let out = basic::relu(x);
            let g = basic::relu_backward(&out, &reshape_like(&out, r))?;
            (Vec::new(), g.into_values())
        }
        LayerSpec::Gap => {
            let x = tensor_input(layer, input)?;
            let g = basic::gap_backward(x.channels(), x.spatial(), r)?;
            (Vec::new(), g.into_values())
        }
        LayerSpec::BatchNormTrain { gamma, beta } => {
            let LayerInput::Batch(b) = input else {
                return Err(Error::precondition("batch_norm expects a batch input"));
            };
            let (out, cache) = batch_norm_forward(b, &bn_params(gamma, beta), Mode::Train, BN_EPSILON)?;
            let mut off = 0;
            let up: Vec<_> = out
                .iter()
                .map(|t| {
                    let u = reshape_like(t, &r[off..off + t.len()]);
                    off += t.len();
                    u
                })
                .collect();
            let g = batch_norm_backward(&cache.expect("train mode cache"), gamma, &up)?;
            let p = g.gamma.into_iter().chain(g.beta).collect();
            (p, g.input.into_iter().flat_map(|t| t.into_values()).collect())
        }
        LayerSpec::FullyConnected(p) => {
            let x = vector_input(layer, input)?;
            let g = basic::fully_connected_backward(x, p, r)?;
            (g.weights.into_iter().chain(g.bias).collect(), g.input)
        }
        LayerSpec::SoftmaxCrossEntropy { label } => {
            let x = vector_input(layer, input)?;
            let (_, g) = softmax_cross_entropy(x, *label)?;
            (Vec::new(), g.into_iter().map(|v| v * r[0]).collect())
        }
    })
}

fn projected_loss(layer: &LayerSpec, input: &LayerInput, r: &[f64]) -> Result<f64> {
    let y = forward(layer, input)?;
    Ok(y.iter().zip(r).map(|(a, b)| a * b).sum())
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients against central differences for every
/// parameter and input coordinate.
pub fn finite_difference_check(layer: &LayerSpec, input: &LayerInput, tolerance: f64) -> Result<GradCheckReport> {
    if tolerance <= 0.0 {
        return Err(Error::precondition("tolerance must be positive"));
    }
    let out_len = forward(layer, input)?.len();
    let r: Vec<f64> = match layer {
        LayerSpec::SoftmaxCrossEntropy { .. } => vec![1.0],
        _ => {
            let mut rng = Xoshiro256StarStar::seed_from_u64(0x6772_6164);
            (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    };
    let (ga_params, ga_input) = analytic(layer, input, &r)?;

    let mut worst = (0.0f64, String::from("none"));
    let mut checked = 0usize;

    let params = layer.params();
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + FD_STEP;
        let plus = projected_loss(&layer.with_params(&p), input, &r)?;
        p[i] = params[i] - FD_STEP;
        let minus = projected_loss(&layer.with_params(&p), input, &r)?;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let e = rel_error(ga_params[i], numeric);
        checked += 1;
        if e > worst.0 {
            worst = (e, format!("param[{i}]"));
        }
    }

    let x = input.flat();
    for i in 0..x.len() {
        let mut v = x.clone();
        v[i] = x[i] + FD_STEP;
        let plus = projected_loss(layer, &input.with_flat(&v), &r)?;
        v[i] = x[i] - FD_STEP;
        let minus = projected_loss(layer, &input.with_flat(&v), &r)?;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let e = rel_error(ga_input[i], numeric);
        checked += 1;
        if e > worst.0 {
            worst = (e, format!("input[{i}]"));
        }
    }

    Ok(GradCheckReport {
        layer: layer.name(),
        checked,
        max_rel_error: worst.0,
        worst_coordinate: worst.1,
        tolerance,
        passed: worst.0 < tolerance,
    })
}
