//! Batched forward and backward passes through the two-stream network.
//!
//! Per stream: Conv -> BN -> ReLU, then three residual blocks, with 2x2x2 max
//! pooling after the stages listed in `NetConfig::pool_after`. A residual
//! block computes `relu(bn2(conv2(relu(bn1(conv1(x))))) + skip(x))` where
//! `skip` is the identity or a 1x1x1 projection. The two streams' GAP vectors
//! are concatenated, passed through dropout and a fully connected layer.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layers::{
    batch_norm_backward, batch_norm_forward, conv3d, conv3d_backward_opt, dropout, dropout_backward, fully_connected,
    fully_connected_backward, gap, gap_backward, maxpool3d, maxpool3d_backward, relu, relu_backward,
    softmax_cross_entropy, BatchStats, BnCache, ConvGeometry, ConvKernels, Mode, BN_EPSILON, BN_MOMENTUM,
};
use crate::network::params::{ConvBn, NetworkParams, ResBlock, Stream};
use crate::tensor::{Dims3, Scalar, Tensor4, Volume};

type Batch<T> = Vec<Tensor4<T>>;

struct ConvBnCache<T> {
    input: Batch<T>,
    bn: Option<BnCache<T>>,
}

struct PoolCache {
    channels: usize,
    dims: Dims3,
    argmax: Vec<Vec<usize>>,
}

struct StemCache<T> {
    conv: ConvBnCache<T>,
    act: Batch<T>,
}

struct BlockCache<T> {
    conv1: ConvBnCache<T>,
    hidden: Batch<T>,
    conv2: ConvBnCache<T>,
    out: Batch<T>,
}

struct StreamCache<T> {
    stem: StemCache<T>,
    blocks: Vec<BlockCache<T>>,
    /// Pool caches indexed by stage (0 = stem, 1..=3 = blocks).
    pools: Vec<Option<PoolCache>>,
    /// Input to global average pooling.
    last: Batch<T>,
}

/// Intermediate state kept for the backward pass.
pub struct NetCache<T> {
    streams: [StreamCache<T>; 2],
    features: Vec<Vec<T>>,
    dropout_masks: Vec<Vec<T>>,
}

impl<T: Scalar> NetCache<T> {
    /// Concatenated `[left GAP, right GAP]` vector per sample, before dropout.
    pub fn features(&self) -> &[Vec<T>] {
        &self.features
    }

    /// Final-stage post-ReLU maps of one stream (0 = left, 1 = right).
    pub fn final_maps(&self, stream: usize) -> &[Tensor4<T>] {
        &self.streams[stream].last
    }

    /// Input and output of residual block `block` (0-based) in one stream.
    pub fn block_io(&self, stream: usize, block: usize) -> (&[Tensor4<T>], &[Tensor4<T>]) {
        let b = &self.streams[stream].blocks[block];
        (&b.conv1.input, &b.out)
    }

    /// Train-mode batch statistics of every BN layer in [`NetworkParams::tensors`] order.
    pub fn batch_stats(&self) -> Vec<&BatchStats> {
        let mut out = Vec::new();
        for s in &self.streams {
            if let Some(c) = &s.stem.conv.bn {
                out.push(&c.stats);
            }
            for b in &s.blocks {
                for c in [&b.conv1.bn, &b.conv2.bn].into_iter().flatten() {
                    out.push(&c.stats);
                }
            }
        }
        out
    }
}

pub struct BatchForward<T> {
    pub logits: Vec<Vec<T>>,
    pub cache: NetCache<T>,
}

fn conv_batch<T: Scalar>(
    inputs: &[Tensor4<T>],
    kernels: &ConvKernels<T>,
    bias: &[T],
    geom: ConvGeometry,
) -> Result<Batch<T>> {
    inputs.par_iter().map(|x| conv3d(x, kernels, bias, geom)).collect()
}

fn conv_bn_forward<T: Scalar>(layer: &ConvBn<T>, inputs: Batch<T>, mode: Mode) -> Result<(Batch<T>, ConvBnCache<T>)> {
    let conv = conv_batch(&inputs, &layer.kernels, &layer.bias, layer.geometry())?;
    let (out, bn) = batch_norm_forward(&conv, &layer.bn, mode, BN_EPSILON)?;
    Ok((out, ConvBnCache { input: inputs, bn }))
}

fn relu_batch<T: Scalar>(b: &[Tensor4<T>]) -> Batch<T> {
    b.iter().map(relu).collect()
}

fn pool_batch<T: Scalar>(b: Batch<T>) -> Result<(Batch<T>, PoolCache)> {
    let channels = b[0].channels();
    let dims = b[0].spatial();
    let mut out = Vec::with_capacity(b.len());
    let mut argmax = Vec::with_capacity(b.len());
    for t in &b {
        let (o, a) = maxpool3d(t)?;
        out.push(o);
        argmax.push(a);
    }
    Ok((out, PoolCache { channels, dims, argmax }))
}

fn block_forward<T: Scalar>(block: &ResBlock<T>, x: Batch<T>, mode: Mode) -> Result<(Batch<T>, BlockCache<T>)> {
    let skip = match &block.projection {
        Some(p) => Some(conv_batch(
            &x,
            &p.kernels,
            &p.bias,
            ConvGeometry {
                padding: [0; 3],
                stride: [1; 3],
            },
        )?),
        None => None,
    };
    let (b1, conv1) = conv_bn_forward(&block.conv1, x, mode)?;
    let hidden = relu_batch(&b1);
    let (mut b2, conv2) = conv_bn_forward(&block.conv2, hidden.clone(), mode)?;
    // identity skip reads the block input kept in conv1's cache
    let skip = skip.as_ref().unwrap_or(&conv1.input);
    for (s, k) in b2.iter_mut().zip(skip) {
        s.add_assign(k)?;
    }
    let out = relu_batch(&b2);
    Ok((
        out.clone(),
        BlockCache {
            conv1,
            hidden,
            conv2,
            out,
        },
    ))
}

fn stream_forward<T: Scalar>(
    stream: &Stream<T>,
    inputs: Batch<T>,
    pool_after: &[usize],
    mode: Mode,
) -> Result<StreamCache<T>> {
    let mut pools = Vec::with_capacity(stream.blocks.len() + 1);
    let (b0, conv) = conv_bn_forward(&stream.stem, inputs, mode)?;
    let act = relu_batch(&b0);
    let mut x = act.clone();
    if pool_after.contains(&0) {
        let (p, c) = pool_batch(x)?;
        x = p;
        pools.push(Some(c));
    } else {
        pools.push(None);
    }
    let mut blocks = Vec::with_capacity(stream.blocks.len());
    for (i, block) in stream.blocks.iter().enumerate() {
        let (out, cache) = block_forward(block, x, mode)?;
        blocks.push(cache);
        x = out;
        if pool_after.contains(&(i + 1)) {
            let (p, c) = pool_batch(x)?;
            x = p;
            pools.push(Some(c));
        } else {
            pools.push(None);
        }
    }
    Ok(StreamCache {
        stem: StemCache { conv, act },
        blocks,
        pools,
        last: x,
    })
}

/// Runs a batch of (left, right) tensors through the network. Train mode
/// uses batch statistics (batch size >= 2) and consumes `rng` for dropout.
pub fn forward_batch<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    left: Batch<T>,
    right: Batch<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<BatchForward<T>> {
    let dims = params.config.input_dims;
    if left.is_empty() || left.len() != right.len() {
        return Err(Error::shape(
            "forward: left/right batches must be non-empty and equal length",
        ));
    }
    for t in left.iter().chain(&right) {
        if t.channels() != 1 || t.spatial() != dims {
            return Err(Error::shape(format!(
                "forward: expected 1-channel {dims} input, got {}-channel {}",
                t.channels(),
                t.spatial()
            )));
        }
    }
    let pool_after = &params.config.pool_after;
    let (ls, rs) = rayon::join(
        || stream_forward(&params.streams[0], left, pool_after, mode),
        || stream_forward(&params.streams[1], right, pool_after, mode),
    );
    let (ls, rs) = (ls?, rs?);

    let n = ls.last.len();
    let mut features = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        let mut f = gap(&ls.last[i]);
        f.extend(gap(&rs.last[i]));
        let (dropped, mask) = dropout(&f, params.config.dropout_ratio, mode, rng)?;
        logits.push(fully_connected(&dropped, &params.fc)?);
        features.push(f);
        masks.push(mask);
    }
    Ok(BatchForward {
        logits,
        cache: NetCache {
            streams: [ls, rs],
            features,
            dropout_masks: masks,
        },
    })
}

/// Single-pair forward pass. Volumes must already be intensity-normalized.
pub fn forward<R: Rng + ?Sized>(
    params: &NetworkParams<f32>,
    left: &Volume,
    right: &Volume,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<f32>, NetCache<f32>)> {
    let out = forward_batch(params, vec![left.to_tensor()], vec![right.to_tensor()], mode, rng)?;
    Ok((out.logits.into_iter().next().expect("one sample"), out.cache))
}

fn add_into<T: Scalar>(acc: &mut [T], v: &[T]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Backward through conv+BN for a batch; returns input gradients if wanted.
fn conv_bn_backward<T: Scalar>(
    layer: &ConvBn<T>,
    grads: &mut ConvBn<T>,
    cache: &ConvBnCache<T>,
    upstream: &[Tensor4<T>],
    want_input: bool,
) -> Result<Option<Batch<T>>> {
    let bn_cache = cache
        .bn
        .as_ref()
        .ok_or_else(|| Error::precondition("backward requires a train-mode forward pass"))?;
    let bn = batch_norm_backward(bn_cache, &layer.bn.gamma, upstream)?;
    add_into(&mut grads.bn.gamma, &bn.gamma);
    add_into(&mut grads.bn.beta, &bn.beta);
    let geom = layer.geometry();
    let per_sample: Vec<_> = cache
        .input
        .par_iter()
        .zip(bn.input.par_iter())
        .map(|(x, u)| conv3d_backward_opt(x, &layer.kernels, geom, u, want_input))
        .collect::<Result<_>>()?;
    let mut inputs = want_input.then(|| Vec::with_capacity(per_sample.len()));
    for g in per_sample {
        add_into(&mut grads.kernels.weights, &g.kernels);
        add_into(&mut grads.bias, &g.bias);
        if let (Some(v), Some(gi)) = (inputs.as_mut(), g.input) {
            v.push(gi);
        }
    }
    Ok(inputs)
}

fn pool_backward<T: Scalar>(cache: &PoolCache, upstream: Batch<T>) -> Result<Batch<T>> {
    upstream
        .iter()
        .zip(&cache.argmax)
        .map(|(u, a)| maxpool3d_backward(cache.channels, cache.dims, a, u))
        .collect()
}

fn block_backward<T: Scalar>(
    block: &ResBlock<T>,
    grads: &mut ResBlock<T>,
    cache: &BlockCache<T>,
    upstream: Batch<T>,
) -> Result<Batch<T>> {
    let d_sum: Batch<T> = cache
        .out
        .iter()
        .zip(&upstream)
        .map(|(o, u)| relu_backward(o, u))
        .collect::<Result<_>>()?;
    let d_hidden = conv_bn_backward(&block.conv2, &mut grads.conv2, &cache.conv2, &d_sum, true)?
        .expect("input gradient requested");
    let d_b1: Batch<T> = cache
        .hidden
        .iter()
        .zip(&d_hidden)
        .map(|(h, u)| relu_backward(h, u))
        .collect::<Result<_>>()?;
    let mut d_x =
        conv_bn_backward(&block.conv1, &mut grads.conv1, &cache.conv1, &d_b1, true)?.expect("input gradient requested");
    match (&block.projection, &mut grads.projection) {
        (Some(p), Some(gp)) => {
            let geom = ConvGeometry {
                padding: [0; 3],
                stride: [1; 3],
            };
            let per_sample: Vec<_> = cache
                .conv1
                .input
                .par_iter()
                .zip(d_sum.par_iter())
                .map(|(x, u)| conv3d_backward_opt(x, &p.kernels, geom, u, true))
                .collect::<Result<_>>()?;
            for (dx, g) in d_x.iter_mut().zip(per_sample) {
                add_into(&mut gp.kernels.weights, &g.kernels);
                add_into(&mut gp.bias, &g.bias);
                dx.add_assign(&g.input.expect("input gradient requested"))?;
            }
        }
        _ => {
            for (dx, s) in d_x.iter_mut().zip(&d_sum) {
                dx.add_assign(s)?;
            }
        }
    }
    Ok(d_x)
}

fn stream_backward<T: Scalar>(
    stream: &Stream<T>,
    grads: &mut Stream<T>,
    cache: &StreamCache<T>,
    upstream: Batch<T>,
) -> Result<()> {
    let mut d = upstream;
    for i in (0..stream.blocks.len()).rev() {
        if let Some(pc) = &cache.pools[i + 1] {
            d = pool_backward(pc, d)?;
        }
        d = block_backward(&stream.blocks[i], &mut grads.blocks[i], &cache.blocks[i], d)?;
    }
    if let Some(pc) = &cache.pools[0] {
        d = pool_backward(pc, d)?;
    }
    let d_b0: Batch<T> = cache
        .stem
        .act
        .iter()
        .zip(&d)
        .map(|(a, u)| relu_backward(a, u))
        .collect::<Result<_>>()?;
    conv_bn_backward(&stream.stem, &mut grads.stem, &cache.stem.conv, &d_b0, false)?;
    Ok(())
}

/// Accumulates parameter gradients for upstream logit gradients `d_logits`
/// (one vector per sample) into `grads`.
pub fn backward_batch<T: Scalar>(
    params: &NetworkParams<T>,
    cache: &NetCache<T>,
    d_logits: &[Vec<T>],
    grads: &mut NetworkParams<T>,
) -> Result<()> {
    let n = cache.features.len();
    if d_logits.len() != n {
        return Err(Error::shape("backward: one logit gradient per sample required"));
    }
    let half = params.feature_dim() / 2;
    let mut d_last: [Batch<T>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let dropped: Vec<T> = cache.features[i]
            .iter()
            .zip(&cache.dropout_masks[i])
            .map(|(&f, &m)| f * m)
            .collect();
        let fc = fully_connected_backward(&dropped, &params.fc, &d_logits[i])?;
        add_into(&mut grads.fc.weights, &fc.weights);
        add_into(&mut grads.fc.bias, &fc.bias);
        let d_feat = dropout_backward(&cache.dropout_masks[i], &fc.input)?;
        for s in 0..2 {
            let last = &cache.streams[s].last[i];
            d_last[s].push(gap_backward(
                last.channels(),
                last.spatial(),
                &d_feat[s * half..(s + 1) * half],
            )?);
        }
    }
    let [dl, dr] = d_last;
    let [gl, gr] = &mut grads.streams;
    let (a, b) = rayon::join(
        || stream_backward(&params.streams[0], gl, &cache.streams[0], dl),
        || stream_backward(&params.streams[1], gr, &cache.streams[1], dr),
    );
    a?;
    b?;
    Ok(())
}

/// Mean cross-entropy over the batch and its gradient w.r.t. every logit.
pub fn batch_loss<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> Result<(f64, Vec<Vec<T>>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::shape("batch_loss: one label per sample required"));
    }
    let scale = 1.0 / logits.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (l, &y) in logits.iter().zip(labels) {
        let (loss, g) = softmax_cross_entropy(l, y)?;
        total += loss;
        grads.push(g.into_iter().map(|v| T::from_f64(v.as_f64() * scale)).collect());
    }
    Ok((total * scale, grads))
}

/// Folds train-mode batch statistics into every BN layer's running averages.
pub fn update_running_stats<T: Scalar>(params: &mut NetworkParams<T>, cache: &NetCache<T>) {
    let stats = cache.batch_stats();
    let mut it = stats.into_iter();
    for stream in params.streams.iter_mut() {
        if let Some(s) = it.next() {
            stream.stem.bn.update_running(s, BN_MOMENTUM);
        }
        for block in stream.blocks.iter_mut() {
            for layer in [&mut block.conv1, &mut block.conv2] {
                if let Some(s) = it.next() {
                    layer.bn.update_running(s, BN_MOMENTUM);
                }
            }
        }
    }
}

/// One SGD-with-momentum step on a labelled batch. Returns the batch loss.
///
/// `velocity <- momentum * velocity - lr * grad; params <- params + velocity`.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Scalar, R: Rng + ?Sized>(
    params: &mut NetworkParams<T>,
    velocity: &mut NetworkParams<T>,
    left: Batch<T>,
    right: Batch<T>,
    labels: &[usize],
    lr: f64,
    momentum: f64,
    rng: &mut R,
) -> Result<f64> {
    let fwd = forward_batch(params, left, right, Mode::Train, rng)?;
    let (loss, d_logits) = batch_loss(&fwd.logits, labels)?;
    if !loss.is_finite() {
        return Err(Error::TrainingAborted(format!("non-finite loss {loss}")));
    }
    let mut grads = params.zeros_like();
    backward_batch(params, &fwd.cache, &d_logits, &mut grads)?;
    update_running_stats(params, &fwd.cache);
    let (lr, mu) = (T::from_f64(lr), T::from_f64(momentum));
    for ((p, v), g) in params
        .tensors_mut()
        .into_iter()
        .zip(velocity.tensors_mut())
        .zip(grads.tensors())
    {
        if !p.learnable {
            continue;
        }
        for ((pv, vv), &gv) in p.values.iter_mut().zip(v.values.iter_mut()).zip(g.values) {
            *vv = mu * *vv - lr * gv;
            *pv += *vv;
        }
    }
    Ok(loss)
}
