//! Direct 3D convolution with zero padding.
//!
//! Stride-1 geometries use the flat padded-grid kernels in `conv_flat`; the
//! general path below walks contiguous x-rows of input and output so the
//! multiply-adds vectorize without reassociating any sum.

use crate::error::{Error, Result};
use crate::layers::conv_flat::{self, FlatGeometry};
use crate::tensor::{Dims3, Scalar, Tensor4};

/// Kernel bank of shape `(out_c, in_c, kx, ky, kz)`, dz fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernels<T> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: [usize; 3],
    pub weights: Vec<T>,
}

impl<T: Scalar> ConvKernels<T> {
    pub fn zeros(out_channels: usize, in_channels: usize, size: [usize; 3]) -> Self {
        let n = out_channels * in_channels * size[0] * size[1] * size[2];
        ConvKernels {
            out_channels,
            in_channels,
            size,
            weights: vec![T::zero(); n],
        }
    }

    pub fn taps(&self) -> usize {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Flat index of `kernels[o, c, dx, dy, dz]`.
    #[inline]
    pub fn index(&self, o: usize, c: usize, dx: usize, dy: usize, dz: usize) -> usize {
        (((o * self.in_channels + c) * self.size[0] + dx) * self.size[1] + dy) * self.size[2] + dz
    }

    pub fn shape(&self) -> [usize; 5] {
        [
            self.out_channels,
            self.in_channels,
            self.size[0],
            self.size[1],
            self.size[2],
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.out_channels * self.in_channels * self.taps() {
            return Err(Error::shape(format!(
                "kernel bank {:?} needs {} weights, has {}",
                self.shape(),
                self.out_channels * self.in_channels * self.taps(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite convolution weight".into()));
        }
        Ok(())
    }
}

/// Per-axis zero padding and stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub padding: [usize; 3],
    pub stride: [usize; 3],
}

impl ConvGeometry {
    /// Stride 1 with padding `k / 2`, which preserves spatial dims for odd `k`.
    pub fn same(size: [usize; 3]) -> Self {
        ConvGeometry {
            padding: [size[0] / 2, size[1] / 2, size[2] / 2],
            stride: [1, 1, 1],
        }
    }

    pub fn output_dims(&self, input: Dims3, size: [usize; 3]) -> Result<Dims3> {
        let inp = input.as_array();
        let mut out = [0usize; 3];
        for a in 0..3 {
            if self.stride[a] == 0 {
                return Err(Error::shape("convolution stride must be positive"));
            }
            let span = inp[a] + 2 * self.padding[a];
            if span < size[a] {
                return Err(Error::shape(format!(
                    "axis {a}: padded extent {span} smaller than kernel {}",
                    size[a]
                )));
            }
            out[a] = (span - size[a]) / self.stride[a] + 1;
        }
        Ok(Dims3::new(out[0], out[1], out[2]))
    }
}

/// Gradients of a convolution with respect to its kernels, bias and input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Tensor4<T>>,
}

/// Output positions `o` along one axis for which `o * stride + d - pad`
/// lands inside `[0, n)`. Returns a half-open range.
#[inline]
fn valid_range(n: usize, m: usize, pad: usize, d: usize, stride: usize) -> (usize, usize) {
    let lo = if pad > d { (pad - d).div_ceil(stride) } else { 0 };
    let hi = if n + pad > d {
        ((n - 1 + pad - d) / stride + 1).min(m)
    } else {
        0
    };
    (lo, hi.max(lo))
}

fn check_inputs<T: Scalar>(input: &Tensor4<T>, kernels: &ConvKernels<T>, bias: &[T]) -> Result<()> {
    kernels.validate()?;
    if input.channels() != kernels.in_channels {
        return Err(Error::shape(format!(
            "conv3d: input has {} channels, kernels expect {}",
            input.channels(),
            kernels.in_channels
        )));
    }
    if bias.len() != kernels.out_channels {
        return Err(Error::shape(format!(
            "conv3d: bias length {} != out channels {}",
            bias.len(),
            kernels.out_channels
        )));
    }
    if bias.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric("non-finite convolution bias".into()));
    }
    Ok(())
}

pub fn conv3d<T: Scalar>(
    input: &Tensor4<T>,
    kernels: &ConvKernels<T>,
    bias: &[T],
    geom: ConvGeometry,
) -> Result<Tensor4<T>> {
    check_inputs(input, kernels, bias)?;
    let ind = input.spatial();
    let outd = geom.output_dims(ind, kernels.size)?;
    if geom.stride == [1, 1, 1] {
        let fg = FlatGeometry::new(ind, geom.padding, kernels.size, outd);
        return Ok(conv_flat::forward(&fg, input, &kernels.weights, bias));
    }
    let mut out = Tensor4::zeros(kernels.out_channels, outd);
    let [px, py, pz] = geom.padding;
    let [sx, sy, sz] = geom.stride;
    let [kx, ky, kz] = kernels.size;

    for o in 0..kernels.out_channels {
        let out_o = out.channel_mut(o);
        out_o.fill(bias[o]);
        for c in 0..kernels.in_channels {
            let in_c = input.channel(c);
            for dx in 0..kx {
                let (x_lo, x_hi) = valid_range(ind.x, outd.x, px, dx, sx);
                if x_lo >= x_hi {
                    continue;
                }
                let nx = x_hi - x_lo;
                for dy in 0..ky {
                    let (y_lo, y_hi) = valid_range(ind.y, outd.y, py, dy, sy);
                    for dz in 0..kz {
                        let (z_lo, z_hi) = valid_range(ind.z, outd.z, pz, dz, sz);
                        let w = kernels.weights[kernels.index(o, c, dx, dy, dz)];
                        for oz in z_lo..z_hi {
                            let iz = oz * sz + dz - pz;
                            for oy in y_lo..y_hi {
                                let iy = oy * sy + dy - py;
                                let ob = outd.index(x_lo, oy, oz);
                                let ib = ind.index(x_lo * sx + dx - px, iy, iz);
                                let orow = &mut out_o[ob..ob + nx];
                                if sx == 1 {
                                    let irow = &in_c[ib..ib + nx];
                                    for (acc, &v) in orow.iter_mut().zip(irow) {
                                        *acc += w * v;
                                    }
                                } else {
                                    for (j, acc) in orow.iter_mut().enumerate() {
                                        *acc += w * in_c[ib + j * sx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dot product with eight independent partial sums in a fixed order.
#[inline]
fn dot_lanes<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let chunks = a.len() / 8;
    for k in 0..chunks {
        let aa = &a[k * 8..k * 8 + 8];
        let bb = &b[k * 8..k * 8 + 8];
        for l in 0..8 {
            lanes[l] += aa[l] * bb[l];
        }
    }
    let mut tail = T::zero();
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    let mut s = T::zero();
    for l in lanes {
        s += l;
    }
    s + tail
}

/// Full backward pass: gradients for kernels, bias and input.
pub fn conv3d_backward<T: Scalar>(
    input: &Tensor4<T>,
    kernels: &ConvKernels<T>,
    geom: ConvGeometry,
    upstream: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    conv3d_backward_opt(input, kernels, geom, upstream, true)
}

/// Backward pass; `want_input = false` skips the input gradient (first layer).
pub fn conv3d_backward_opt<T: Scalar>(
    input: &Tensor4<T>,
    kernels: &ConvKernels<T>,
    geom: ConvGeometry,
    upstream: &Tensor4<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    kernels.validate()?;
    if input.channels() != kernels.in_channels {
        return Err(Error::shape("conv3d_backward: input channel mismatch"));
    }
    let ind = input.spatial();
    let outd = geom.output_dims(ind, kernels.size)?;
    if upstream.channels() != kernels.out_channels || upstream.spatial() != outd {
        return Err(Error::shape(format!(
            "conv3d_backward: upstream ({}, {}) != output ({}, {})",
            upstream.channels(),
            upstream.spatial(),
            kernels.out_channels,
            outd
        )));
    }
    if geom.stride == [1, 1, 1] {
        let fg = FlatGeometry::new(ind, geom.padding, kernels.size, outd);
        let (kernels, bias, input) = conv_flat::backward(&fg, input, &kernels.weights, upstream, want_input);
        return Ok(ConvGrads { kernels, bias, input });
    }
    let [px, py, pz] = geom.padding;
    let [sx, sy, sz] = geom.stride;
    let [kx, ky, kz] = kernels.size;

    let bias: Vec<T> = (0..kernels.out_channels)
        .map(|o| T::from_f64(upstream.channel(o).iter().map(|v| v.as_f64()).sum()))
        .collect();

    let mut grad_w = vec![T::zero(); kernels.weights.len()];
    let mut grad_in = if want_input {
        Some(Tensor4::zeros(input.channels(), ind))
    } else {
        None
    };

    for o in 0..kernels.out_channels {
        let up_o = upstream.channel(o);
        for c in 0..kernels.in_channels {
            let in_c = input.channel(c);
            for dx in 0..kx {
                let (x_lo, x_hi) = valid_range(ind.x, outd.x, px, dx, sx);
                if x_lo >= x_hi {
                    continue;
                }
                let nx = x_hi - x_lo;
                for dy in 0..ky {
                    let (y_lo, y_hi) = valid_range(ind.y, outd.y, py, dy, sy);
                    for dz in 0..kz {
                        let (z_lo, z_hi) = valid_range(ind.z, outd.z, pz, dz, sz);
                        let widx = kernels.index(o, c, dx, dy, dz);
                        let w = kernels.weights[widx];
                        let mut acc = 0.0f64;
                        for oz in z_lo..z_hi {
                            let iz = oz * sz + dz - pz;
                            for oy in y_lo..y_hi {
                                let iy = oy * sy + dy - py;
                                let ob = outd.index(x_lo, oy, oz);
                                let ib = ind.index(x_lo * sx + dx - px, iy, iz);
                                let urow = &up_o[ob..ob + nx];
                                if sx == 1 {
                                    acc += dot_lanes(urow, &in_c[ib..ib + nx]).as_f64();
                                    if let Some(gi) = grad_in.as_mut() {
                                        let grow = &mut gi.channel_mut(c)[ib..ib + nx];
                                        for (g, &u) in grow.iter_mut().zip(urow) {
                                            *g += w * u;
                                        }
                                    }
                                } else {
                                    let mut s = T::zero();
                                    for (j, &u) in urow.iter().enumerate() {
                                        s += u * in_c[ib + j * sx];
                                    }
                                    acc += s.as_f64();
                                    if let Some(gi) = grad_in.as_mut() {
                                        let gc = gi.channel_mut(c);
                                        for (j, &u) in urow.iter().enumerate() {
                                            gc[ib + j * sx] += w * u;
                                        }
                                    }
                                }
                            }
                        }
                        grad_w[widx] = T::from_f64(acc);
                    }
                }
            }
        }
    }

    Ok(ConvGrads {
        kernels: grad_w,
        bias,
        input: grad_in,
    })
}
