//! Class activation maps: FC-weighted sums of the final-stage feature maps.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::network::forward::forward;
use crate::network::params::NetworkParams;
use crate::tensor::{Dims3, Volume};

/// Per-stream map `sum_k w[class, k] * F_k(p)` at final-stage resolution,
/// where `F_k` are the post-ReLU final-block maps and `w` is restricted to the
/// stream's half of the feature vector. Returns `[left, right]`.
pub fn relevance_map_native(
    params: &NetworkParams<f32>,
    left: &Volume,
    right: &Volume,
    class: usize,
) -> Result<[Volume; 2]> {
    if class >= params.fc.out_dim {
        return Err(Error::precondition(format!(
            "class {class} out of range for {} outputs",
            params.fc.out_dim
        )));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(0);
    let (_, cache) = forward(params, left, right, Mode::Infer, &mut rng)?;
    let half = params.feature_dim() / 2;
    let row = params.fc.row(class);
    let mut out = Vec::with_capacity(2);
    for s in 0..2 {
        let maps = &cache.final_maps(s)[0];
        let w = &row[s * half..(s + 1) * half];
        let n = maps.spatial().len();
        let mut acc = vec![0.0f64; n];
        for (k, &wk) in w.iter().enumerate() {
            let wk = wk as f64;
            for (a, &f) in acc.iter_mut().zip(maps.channel(k)) {
                *a += wk * f as f64;
            }
        }
        out.push(Volume::new(
            maps.spatial(),
            acc.into_iter().map(|v| v as f32).collect(),
        )?);
    }
    let right = out.pop().expect("two streams");
    let left = out.pop().expect("two streams");
    Ok([left, right])
}

/// Trilinear resampling of `src` onto `dims`. A source cell `j` is centred on
/// target coordinate `(j + 0.5) * stride - 0.5`, with `stride` the per-axis
/// integer downsampling factor of the network; positions beyond the outermost
/// centres are clamped.
pub fn upsample_trilinear(src: &Volume, dims: Dims3, stride: [usize; 3]) -> Result<Volume> {
    if stride.contains(&0) {
        return Err(Error::precondition("upsample stride must be positive"));
    }
    let sd = src.dims();
    let axis = |i: usize, n_src: usize, s: usize| -> (usize, usize, f64) {
        let c = ((i as f64 + 0.5) / s as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
        let lo = c.floor() as usize;
        let hi = (lo + 1).min(n_src - 1);
        (lo, hi, c - lo as f64)
    };
    let xs: Vec<_> = (0..dims.x).map(|i| axis(i, sd.x, stride[0])).collect();
    let ys: Vec<_> = (0..dims.y).map(|i| axis(i, sd.y, stride[1])).collect();
    let zs: Vec<_> = (0..dims.z).map(|i| axis(i, sd.z, stride[2])).collect();
    let v = |x, y, z| src.get(x, y, z) as f64;
    let mut out = Vec::with_capacity(dims.len());
    for &(z0, z1, fz) in &zs {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let c00 = v(x0, y0, z0) * (1.0 - fx) + v(x1, y0, z0) * fx;
                let c10 = v(x0, y1, z0) * (1.0 - fx) + v(x1, y1, z0) * fx;
                let c01 = v(x0, y0, z1) * (1.0 - fx) + v(x1, y0, z1) * fx;
                let c11 = v(x0, y1, z1) * (1.0 - fx) + v(x1, y1, z1) * fx;
                let c0 = c00 * (1.0 - fy) + c10 * fy;
                let c1 = c01 * (1.0 - fy) + c11 * fy;
                out.push((c0 * (1.0 - fz) + c1 * fz) as f32);
            }
        }
    }
    Volume::new(dims, out)
}

/// Class activation maps upsampled to the network's input dims.
pub fn relevance_map(params: &NetworkParams<f32>, left: &Volume, right: &Volume, class: usize) -> Result<[Volume; 2]> {
    let native = relevance_map_native(params, left, right, class)?;
    let dims = params.config.input_dims;
    let pools = params.config.pool_after.len() as u32;
    let s = 2usize.pow(pools);
    let [l, r] = native;
    Ok([
        upsample_trilinear(&l, dims, [s; 3])?,
        upsample_trilinear(&r, dims, [s; 3])?,
    ])
}
