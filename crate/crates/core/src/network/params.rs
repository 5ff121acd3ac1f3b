use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::Result;
use crate::layers::{BatchNormParams, ConvGeometry, ConvKernels, FcParams};
use crate::network::config::{NetConfig, NUM_BLOCKS};
use crate::tensor::Scalar;

/// Convolution followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn<T> {
    pub kernels: ConvKernels<T>,
    pub bias: Vec<T>,
    pub bn: BatchNormParams<T>,
}

/// 1x1x1 convolution on the skip path when channel counts change.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub kernels: ConvKernels<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<T> {
    pub conv1: ConvBn<T>,
    pub conv2: ConvBn<T>,
    pub projection: Option<Projection<T>>,
}

/// One hippocampus stream: stem convolution and three residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream<T> {
    pub stem: ConvBn<T>,
    pub blocks: Vec<ResBlock<T>>,
}

/// Every learnable value of the network plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub config: NetConfig,
    /// `[left, right]`.
    pub streams: [Stream<T>; 2],
    pub fc: FcParams<T>,
}

/// Read-only view of one named parameter tensor.
pub struct ParamRef<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [T],
    pub learnable: bool,
}

pub struct ParamMut<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a mut [T],
    pub learnable: bool,
}

pub const STREAM_NAMES: [&str; 2] = ["left", "right"];

fn he_normal<T: Scalar, R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64(rng.sample::<f64, _>(StandardNormal) * std))
        .collect()
}

impl<T: Scalar> ConvBn<T> {
    fn init<R: Rng + ?Sized>(out_c: usize, in_c: usize, size: [usize; 3], rng: &mut R) -> Self {
        let mut kernels = ConvKernels::zeros(out_c, in_c, size);
        let fan_in = in_c * kernels.taps();
        kernels.weights = he_normal(kernels.weights.len(), fan_in, rng);
        ConvBn {
            kernels,
            bias: vec![T::zero(); out_c],
            bn: BatchNormParams::identity(out_c),
        }
    }

    pub fn geometry(&self) -> ConvGeometry {
        ConvGeometry::same(self.kernels.size)
    }

    fn push_refs<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a, T>>) {
        let c = self.bias.len();
        out.push(ParamRef {
            name: format!("{prefix}.conv.weight"),
            shape: self.kernels.shape().to_vec(),
            values: &self.kernels.weights,
            learnable: true,
        });
        out.push(ParamRef {
            name: format!("{prefix}.conv.bias"),
            shape: vec![c],
            values: &self.bias,
            learnable: true,
        });
        out.push(ParamRef {
            name: format!("{prefix}.bn.gamma"),
            shape: vec![c],
            values: &self.bn.gamma,
            learnable: true,
        });
        out.push(ParamRef {
            name: format!("{prefix}.bn.beta"),
            shape: vec![c],
            values: &self.bn.beta,
            learnable: true,
        });
        out.push(ParamRef {
            name: format!("{prefix}.bn.running_mean"),
            shape: vec![c],
            values: &self.bn.running_mean,
            learnable: false,
        });
        out.push(ParamRef {
            name: format!("{prefix}.bn.running_var"),
            shape: vec![c],
            values: &self.bn.running_var,
            learnable: false,
        });
    }

    fn push_muts<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        let c = self.bias.len();
        let shape = self.kernels.shape().to_vec();
        out.push(ParamMut {
            name: format!("{prefix}.conv.weight"),
            shape,
            values: &mut self.kernels.weights,
            learnable: true,
        });
        out.push(ParamMut {
            name: format!("{prefix}.conv.bias"),
            shape: vec![c],
            values: &mut self.bias,
            learnable: true,
        });
        out.push(ParamMut {
            name: format!("{prefix}.bn.gamma"),
            shape: vec![c],
            values: &mut self.bn.gamma,
            learnable: true,
        });
        out.push(ParamMut {
            name: format!("{prefix}.bn.beta"),
            shape: vec![c],
            values: &mut self.bn.beta,
            learnable: true,
        });
        out.push(ParamMut {
            name: format!("{prefix}.bn.running_mean"),
            shape: vec![c],
            values: &mut self.bn.running_mean,
            learnable: false,
        });
        out.push(ParamMut {
            name: format!("{prefix}.bn.running_var"),
            shape: vec![c],
            values: &mut self.bn.running_var,
            learnable: false,
        });
    }
}

impl<T: Scalar> ResBlock<T> {
    fn init<R: Rng + ?Sized>(out_c: usize, in_c: usize, size: [usize; 3], rng: &mut R) -> Self {
        let conv1 = ConvBn::init(out_c, in_c, size, rng);
        let conv2 = ConvBn::init(out_c, out_c, size, rng);
        let projection = (in_c != out_c).then(|| {
            let mut kernels = ConvKernels::zeros(out_c, in_c, [1, 1, 1]);
            kernels.weights = he_normal(kernels.weights.len(), in_c, rng);
            Projection {
                kernels,
                bias: vec![T::zero(); out_c],
            }
        });
        ResBlock {
            conv1,
            conv2,
            projection,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.bias.len()
    }
}

impl<T: Scalar> NetworkParams<T> {
    pub fn feature_dim(&self) -> usize {
        self.fc.in_dim
    }

    /// Named tensors in a fixed order; this order defines the model file layout.
    pub fn tensors(&self) -> Vec<ParamRef<'_, T>> {
        let mut out = Vec::new();
        for (name, stream) in STREAM_NAMES.iter().zip(&self.streams) {
            stream.stem.push_refs(&format!("{name}.stem"), &mut out);
            for (b, block) in stream.blocks.iter().enumerate() {
                let p = format!("{name}.block{}", b + 1);
                block.conv1.push_refs(&format!("{p}.conv1"), &mut out);
                block.conv2.push_refs(&format!("{p}.conv2"), &mut out);
                if let Some(proj) = &block.projection {
                    out.push(ParamRef {
                        name: format!("{p}.proj.weight"),
                        shape: proj.kernels.shape().to_vec(),
                        values: &proj.kernels.weights,
                        learnable: true,
                    });
                    out.push(ParamRef {
                        name: format!("{p}.proj.bias"),
                        shape: vec![proj.bias.len()],
                        values: &proj.bias,
                        learnable: true,
                    });
                }
            }
        }
        out.push(ParamRef {
            name: "head.fc.weight".into(),
            shape: vec![self.fc.out_dim, self.fc.in_dim],
            values: &self.fc.weights,
            learnable: true,
        });
        out.push(ParamRef {
            name: "head.fc.bias".into(),
            shape: vec![self.fc.out_dim],
            values: &self.fc.bias,
            learnable: true,
        });
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = Vec::new();
        for (name, stream) in STREAM_NAMES.iter().zip(self.streams.iter_mut()) {
            stream.stem.push_muts(&format!("{name}.stem"), &mut out);
            for (b, block) in stream.blocks.iter_mut().enumerate() {
                let p = format!("{name}.block{}", b + 1);
                block.conv1.push_muts(&format!("{p}.conv1"), &mut out);
                block.conv2.push_muts(&format!("{p}.conv2"), &mut out);
                if let Some(proj) = &mut block.projection {
                    let shape = proj.kernels.shape().to_vec();
                    let c = proj.bias.len();
                    out.push(ParamMut {
                        name: format!("{p}.proj.weight"),
                        shape,
                        values: &mut proj.kernels.weights,
                        learnable: true,
                    });
                    out.push(ParamMut {
                        name: format!("{p}.proj.bias"),
                        shape: vec![c],
                        values: &mut proj.bias,
                        learnable: true,
                    });
                }
            }
        }
        let (o, i) = (self.fc.out_dim, self.fc.in_dim);
        out.push(ParamMut {
            name: "head.fc.weight".into(),
            shape: vec![o, i],
            values: &mut self.fc.weights,
            learnable: true,
        });
        out.push(ParamMut {
            name: "head.fc.bias".into(),
            shape: vec![o],
            values: &mut self.fc.bias,
            learnable: true,
        });
        out
    }

    /// Same structure with every value zero (used for gradients and momentum).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.values.fill(T::zero());
        }
        z
    }

    pub fn num_learnable(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|t| t.learnable)
            .map(|t| t.values.len())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(0);
        let mut out: NetworkParams<U> = build_network(&self.config, &mut rng).expect("config already validated");
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.values.iter_mut().zip(src.values) {
                *d = U::from_f64(s.as_f64());
            }
        }
        out
    }
}

/// Allocates and He-initializes a network for `config`.
pub fn build_network<T: Scalar, R: Rng + ?Sized>(config: &NetConfig, rng: &mut R) -> Result<NetworkParams<T>> {
    config.validate()?;
    let stem_c = config.stem_channels();
    let block_c = config.block_channels();
    let make_stream = |rng: &mut R| {
        let stem = ConvBn::init(stem_c, 1, config.kernel_size, rng);
        let mut in_c = stem_c;
        let blocks = (0..NUM_BLOCKS)
            .map(|b| {
                let blk = ResBlock::init(block_c[b], in_c, config.kernel_size, rng);
                in_c = block_c[b];
                blk
            })
            .collect();
        Stream { stem, blocks }
    };
    let left = make_stream(rng);
    let right = make_stream(rng);
    let feat = config.feature_dim();
    let fc = FcParams {
        out_dim: config.num_classes,
        in_dim: feat,
        weights: he_normal(config.num_classes * feat, feat, rng),
        bias: vec![T::zero(); config.num_classes],
    };
    Ok(NetworkParams {
        config: config.clone(),
        streams: [left, right],
        fc,
    })
}
