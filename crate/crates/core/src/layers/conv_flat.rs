//! Stride-1 convolution on a zero-padded, flattened grid.
//!
//! With the input embedded in a padded grid of dims `P`, output voxel `q`
//! (indexed on the same padded strides) reads padded input at `q + off(t)`
//! for a per-tap constant `off(t)`. Every tap is then one long contiguous
//! multiply-add, independent of row length. Positions of the padded index
//! range that are not real outputs are computed and discarded.

use crate::layers::reduce;
use crate::tensor::{Dims3, Scalar, Tensor4};

/// Chunk of the flat output range processed at a time (fits in L1).
const CHUNK: usize = 1024;

pub(crate) struct FlatGeometry {
    pub padded: Dims3,
    pub pad: [usize; 3],
    pub out: Dims3,
    /// Flat offset of each tap, in kernel order (dz fastest).
    pub offsets: Vec<usize>,
    /// One past the padded-grid index of the last real output voxel.
    pub span: usize,
}

impl FlatGeometry {
    pub fn new(input: Dims3, pad: [usize; 3], size: [usize; 3], out: Dims3) -> Self {
        let padded = Dims3::new(input.x + 2 * pad[0], input.y + 2 * pad[1], input.z + 2 * pad[2]);
        let mut offsets = Vec::with_capacity(size[0] * size[1] * size[2]);
        for dx in 0..size[0] {
            for dy in 0..size[1] {
                for dz in 0..size[2] {
                    offsets.push(padded.index(dx, dy, dz));
                }
            }
        }
        let span = padded.index(out.x - 1, out.y - 1, out.z - 1) + 1;
        FlatGeometry {
            padded,
            pad,
            out,
            offsets,
            span,
        }
    }

    /// Copies each channel of `t` (dims `inner`) into a zeroed padded grid.
    pub fn pad_input<T: Scalar>(&self, t: &Tensor4<T>) -> Vec<Vec<T>> {
        let d = t.spatial();
        (0..t.channels())
            .map(|c| {
                let mut p = vec![T::zero(); self.padded.len()];
                let src = t.channel(c);
                for z in 0..d.z {
                    for y in 0..d.y {
                        let s = d.index(0, y, z);
                        let o = self.padded.index(self.pad[0], y + self.pad[1], z + self.pad[2]);
                        p[o..o + d.x].copy_from_slice(&src[s..s + d.x]);
                    }
                }
                p
            })
            .collect()
    }

    /// Scatters an output-shaped tensor onto the padded index range
    /// (length `span`), with zeros at non-output positions.
    pub fn spread_output<T: Scalar>(&self, t: &Tensor4<T>) -> Vec<Vec<T>> {
        let d = self.out;
        (0..t.channels())
            .map(|c| {
                let mut p = vec![T::zero(); self.span];
                let src = t.channel(c);
                for z in 0..d.z {
                    for y in 0..d.y {
                        let s = d.index(0, y, z);
                        let o = self.padded.index(0, y, z);
                        p[o..o + d.x].copy_from_slice(&src[s..s + d.x]);
                    }
                }
                p
            })
            .collect()
    }

    /// Gathers real output voxels from a padded-index buffer.
    pub fn gather_output<T: Scalar>(&self, flat: &[T], dst: &mut [T]) {
        let d = self.out;
        for z in 0..d.z {
            for y in 0..d.y {
                let s = self.padded.index(0, y, z);
                let o = d.index(0, y, z);
                dst[o..o + d.x].copy_from_slice(&flat[s..s + d.x]);
            }
        }
    }

    /// Extracts the interior (un-padded) region of a padded grid.
    pub fn crop_input<T: Scalar>(&self, padded: &[T], inner: Dims3, dst: &mut [T]) {
        for z in 0..inner.z {
            for y in 0..inner.y {
                let s = self.padded.index(self.pad[0], y + self.pad[1], z + self.pad[2]);
                let o = inner.index(0, y, z);
                dst[o..o + inner.x].copy_from_slice(&padded[s..s + inner.x]);
            }
        }
    }
}

#[inline(always)]
fn saxpy<T: Scalar>(acc: &mut [T], w: T, x: &[T]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += w * v;
    }
}

/// Dot product of one chunk with eight partial sums in the storage type.
/// Each lane sums at most `CHUNK / 8` products; chunk results are then
/// accumulated in f64 by the caller.
#[inline(always)]
fn dot_chunk<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let mut lanes = [T::zero(); 8];
    let n = a.len() / 8 * 8;
    for (ca, cb) in a[..n].chunks_exact(8).zip(b[..n].chunks_exact(8)) {
        for l in 0..8 {
            lanes[l] += ca[l] * cb[l];
        }
    }
    let mut s = 0.0;
    for l in lanes {
        s += l.as_f64();
    }
    for k in n..a.len() {
        s += (a[k] * b[k]).as_f64();
    }
    s
}

/// Runs `body` compiled with AVX2 enabled when the CPU supports it. No
/// fused multiply-add is generated either way, so both paths produce
/// bit-identical results.
macro_rules! dispatch_avx2 {
    ($avx:ident, $generic:ident, ($($arg:ident : $ty:ty),*) -> $ret:ty) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $avx<T: Scalar>($($arg: $ty),*) -> $ret {
            $generic($($arg),*)
        }
    };
}

/// Forward pass; `weights` laid out `(o, c, taps)`.
pub(crate) fn forward<T: Scalar>(g: &FlatGeometry, input: &Tensor4<T>, weights: &[T], bias: &[T]) -> Tensor4<T> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { forward_avx2(g, input, weights, bias) };
    }
    forward_impl(g, input, weights, bias)
}

dispatch_avx2!(forward_avx2, forward_impl, (g: &FlatGeometry, input: &Tensor4<T>, weights: &[T], bias: &[T]) -> Tensor4<T>);
dispatch_avx2!(
    backward_avx2,
    backward_impl,
    (g: &FlatGeometry, input: &Tensor4<T>, weights: &[T], upstream: &Tensor4<T>, want_input: bool)
        -> (Vec<T>, Vec<T>, Option<Tensor4<T>>)
);

/// Backward pass: kernel gradients (chunk partials summed in f64), bias
/// gradients and, if requested, the input gradient.
pub(crate) fn backward<T: Scalar>(
    g: &FlatGeometry,
    input: &Tensor4<T>,
    weights: &[T],
    upstream: &Tensor4<T>,
    want_input: bool,
) -> (Vec<T>, Vec<T>, Option<Tensor4<T>>) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { backward_avx2(g, input, weights, upstream, want_input) };
    }
    backward_impl(g, input, weights, upstream, want_input)
}

#[inline(always)]
fn forward_impl<T: Scalar>(g: &FlatGeometry, input: &Tensor4<T>, weights: &[T], bias: &[T]) -> Tensor4<T> {
    let cin = input.channels();
    let cout = bias.len();
    let taps = g.offsets.len();
    let padded = g.pad_input(input);
    let mut out = Tensor4::zeros(cout, g.out);
    let mut flat = vec![T::zero(); g.span];
    for o in 0..cout {
        for j0 in (0..g.span).step_by(CHUNK) {
            let j1 = (j0 + CHUNK).min(g.span);
            let acc = &mut flat[j0..j1];
            acc.fill(bias[o]);
            for (c, pc) in padded.iter().enumerate() {
                let wrow = &weights[(o * cin + c) * taps..(o * cin + c + 1) * taps];
                for (&w, &off) in wrow.iter().zip(&g.offsets) {
                    saxpy(acc, w, &pc[j0 + off..j1 + off]);
                }
            }
        }
        g.gather_output(&flat, out.channel_mut(o));
    }
    out
}

#[inline(always)]
fn backward_impl<T: Scalar>(
    g: &FlatGeometry,
    input: &Tensor4<T>,
    weights: &[T],
    upstream: &Tensor4<T>,
    want_input: bool,
) -> (Vec<T>, Vec<T>, Option<Tensor4<T>>) {
    let cin = input.channels();
    let taps = g.offsets.len();
    let padded = g.pad_input(input);
    let up = g.spread_output(upstream);

    let bias = up.iter().map(|u| T::from_f64(reduce::sum(u))).collect();

    let mut gw = vec![0.0f64; weights.len()];
    let mut gin_p: Vec<Vec<T>> = if want_input {
        vec![vec![T::zero(); g.padded.len()]; cin]
    } else {
        Vec::new()
    };
    for j0 in (0..g.span).step_by(CHUNK) {
        let j1 = (j0 + CHUNK).min(g.span);
        for (o, uo) in up.iter().enumerate() {
            let uc = &uo[j0..j1];
            for (c, pc) in padded.iter().enumerate() {
                let base = (o * cin + c) * taps;
                for (t, &off) in g.offsets.iter().enumerate() {
                    gw[base + t] += dot_chunk(uc, &pc[j0 + off..j1 + off]);
                }
                if want_input {
                    let gc = &mut gin_p[c];
                    for (t, &off) in g.offsets.iter().enumerate() {
                        saxpy(&mut gc[j0 + off..j1 + off], weights[base + t], uc);
                    }
                }
            }
        }
    }
    let grad_in = want_input.then(|| {
        let d = input.spatial();
        let mut t = Tensor4::zeros(cin, d);
        for (c, gp) in gin_p.iter().enumerate() {
            g.crop_input(gp, d, t.channel_mut(c));
        }
        t
    });
    (gw.into_iter().map(T::from_f64).collect(), bias, grad_in)
}
