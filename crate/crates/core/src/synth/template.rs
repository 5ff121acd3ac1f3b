//! Hippocampus-like template geometry.
//!
//! The template is an ellipsoid centred in the grid with semi-axes
//! proportional to the grid (10, 7, 22 voxels at 29x21x55), with a
//! raised-cosine falloff across the boundary. The long axis is `z`; low `z`
//! is anterior.

use std::f64::consts::PI;

use crate::tensor::Dims3;

/// Semi-axis as a fraction of the grid extent.
const SEMI_AXIS_FRACTION: [f64; 3] = [10.0 / 29.0, 7.0 / 21.0, 22.0 / 55.0];
/// Half-width of the edge transition in normalized radius.
const EDGE: f64 = 0.15;

fn centre_and_axes(dims: Dims3) -> ([f64; 3], [f64; 3]) {
    let d = [dims.x as f64, dims.y as f64, dims.z as f64];
    let c = [(d[0] - 1.0) / 2.0, (d[1] - 1.0) / 2.0, (d[2] - 1.0) / 2.0];
    let a = [
        d[0] * SEMI_AXIS_FRACTION[0],
        d[1] * SEMI_AXIS_FRACTION[1],
        d[2] * SEMI_AXIS_FRACTION[2],
    ];
    (c, a)
}

fn raised_cosine_edge(r: f64) -> f64 {
    if r <= 1.0 - EDGE {
        1.0
    } else if r >= 1.0 + EDGE {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - (1.0 - EDGE)) / (2.0 * EDGE)).cos())
    }
}

/// Tissue occupancy in `[0, 1]`, x-fastest.
pub fn template_shape(dims: Dims3) -> Vec<f32> {
    let (c, a) = centre_and_axes(dims);
    let mut out = Vec::with_capacity(dims.len());
    for z in 0..dims.z {
        for y in 0..dims.y {
            for x in 0..dims.x {
                let r = (((x as f64 - c[0]) / a[0]).powi(2)
                    + ((y as f64 - c[1]) / a[1]).powi(2)
                    + ((z as f64 - c[2]) / a[2]).powi(2))
                .sqrt();
                out.push(raised_cosine_edge(r) as f32);
            }
        }
    }
    out
}

/// Anterior extent along `z`: the first third of the ellipsoid's long axis.
fn anterior_band(dims: Dims3) -> (f64, f64) {
    let (c, a) = centre_and_axes(dims);
    let start = c[2] - a[2];
    (start, start + 2.0 * a[2] / 3.0)
}

/// Smooth atrophy profile `A(p)` in `[0, 1]`: template occupancy times a
/// raised-cosine bump spanning the anterior third of the long axis.
pub fn anterior_bump(dims: Dims3) -> Vec<f32> {
    let shape = template_shape(dims);
    let (z0, z1) = anterior_band(dims);
    let mut out = Vec::with_capacity(dims.len());
    for z in 0..dims.z {
        let zf = z as f64;
        let g = if zf > z0 && zf < z1 {
            0.5 * (1.0 - (2.0 * PI * (zf - z0) / (z1 - z0)).cos())
        } else {
            0.0
        };
        for y in 0..dims.y {
            for x in 0..dims.x {
                out.push(shape[dims.index(x, y, z)] * g as f32);
            }
        }
    }
    out
}

/// Voxels where the planted atrophy acts (`A(p) > 0`).
pub fn bump_mask(dims: Dims3) -> Vec<bool> {
    anterior_bump(dims).iter().map(|&a| a > 0.0).collect()
}
