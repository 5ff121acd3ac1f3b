//! 2x2x2 max pooling with stride 2. Odd trailing voxels are dropped.

use crate::error::{Error, Result};
use crate::tensor::{Dims3, Scalar, Tensor4};

/// Output dims of a 2x2x2/stride-2 pool over `input`.
pub fn pooled_dims(input: Dims3) -> Result<Dims3> {
    if input.x < 2 || input.y < 2 || input.z < 2 {
        return Err(Error::shape(format!(
            "maxpool3d needs every spatial dim >= 2, got {input}"
        )));
    }
    Ok(Dims3::new(input.x / 2, input.y / 2, input.z / 2))
}

/// Returns the pooled tensor and, per output value, the flat index into
/// `input.values()` of the selected maximum (first occurrence in scan order).
pub fn maxpool3d<T: Scalar>(input: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<usize>)> {
    let ind = input.spatial();
    let outd = pooled_dims(ind)?;
    let mut out = Tensor4::zeros(input.channels(), outd);
    let mut argmax = vec![0usize; out.len()];
    let in_sp = ind.len();
    let out_sp = outd.len();
    for c in 0..input.channels() {
        let src = input.channel(c);
        for oz in 0..outd.z {
            for oy in 0..outd.y {
                for ox in 0..outd.x {
                    let mut best = T::neg_infinity();
                    let mut best_i = usize::MAX;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = ind.index(2 * ox + dx, 2 * oy + dy, 2 * oz + dz);
                                let v = src[i];
                                if best_i == usize::MAX || v > best {
                                    best = v;
                                    best_i = i;
                                }
                            }
                        }
                    }
                    let o = outd.index(ox, oy, oz);
                    out.channel_mut(c)[o] = best;
                    argmax[c * out_sp + o] = c * in_sp + best_i;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each upstream value to the input position that won its window.
pub fn maxpool3d_backward<T: Scalar>(
    input_channels: usize,
    input_dims: Dims3,
    argmax: &[usize],
    upstream: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    if upstream.len() != argmax.len() {
        return Err(Error::shape("maxpool3d_backward: upstream/argmax length mismatch"));
    }
    let mut grad = Tensor4::zeros(input_channels, input_dims);
    let g = grad.values_mut();
    for (&i, &u) in argmax.iter().zip(upstream.values()) {
        if i >= g.len() {
            return Err(Error::shape("maxpool3d_backward: argmax index out of range"));
        }
        g[i] += u;
    }
    Ok(grad)
}
