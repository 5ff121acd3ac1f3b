//! Training-set expansion by rigid voxel translation.

use rayon::prelude::*;

use crate::data::LabeledPair;
use crate::error::{Error, Result};
use crate::tensor::Volume;

/// Shift length along each axis, in voxels.
pub const SHIFT: i32 = 2;

/// All offsets in `{-2, 0, 2}^3` except the origin, in lexicographic order.
pub fn directions_26() -> Vec<[i32; 3]> {
    let steps = [-SHIFT, 0, SHIFT];
    let mut out = Vec::with_capacity(26);
    for &dx in &steps {
        for &dy in &steps {
            for &dz in &steps {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// `out(p) = in(p - offset)` where defined, zero elsewhere.
pub fn translate(volume: &Volume, offset: [i32; 3]) -> Result<Volume> {
    let d = volume.dims();
    let dims = d.as_array();
    for axis in 0..3 {
        if offset[axis].unsigned_abs() as usize >= dims[axis] {
            return Err(Error::precondition(format!(
                "offset {offset:?} reaches beyond volume {d} on axis {axis}"
            )));
        }
    }
    // source range [lo, hi) along an axis that lands inside the output
    let span = |n: usize, o: i32| -> (usize, usize) {
        if o >= 0 {
            (0, n - o as usize)
        } else {
            ((-o) as usize, n)
        }
    };
    let (x0, x1) = span(d.x, offset[0]);
    let (y0, y1) = span(d.y, offset[1]);
    let (z0, z1) = span(d.z, offset[2]);
    let shift = |v: usize, o: i32| (v as i64 + o as i64) as usize;
    let src = volume.voxels();
    let mut out = vec![0.0f32; d.len()];
    for z in z0..z1 {
        for y in y0..y1 {
            let s = d.index(x0, y, z);
            let t = d.index(shift(x0, offset[0]), shift(y, offset[1]), shift(z, offset[2]));
            out[t..t + (x1 - x0)].copy_from_slice(&src[s..s + (x1 - x0)]);
        }
    }
    Volume::new(d, out)
}

/// 26 translated copies of every record (both hemispheres shifted together),
/// grouped by source record, offsets in [`directions_26`] order. Originals
/// are not included.
pub fn augment_dataset(records: &[LabeledPair]) -> Result<Vec<LabeledPair>> {
    let dirs = directions_26();
    let nested: Vec<Vec<LabeledPair>> = records
        .par_iter()
        .map(|r| {
            dirs.iter()
                .map(|&o| {
                    Ok(LabeledPair {
                        id: r.id.clone(),
                        left: translate(&r.left, o)?,
                        right: translate(&r.right, o)?,
                        label: r.label,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims3;

    #[test]
    fn twenty_six_lexicographic() {
        let d = directions_26();
        assert_eq!(d.len(), 26);
        assert!(d.contains(&[2, 0, 0]) && d.contains(&[-2, -2, -2]));
        assert!(!d.contains(&[0, 0, 0]));
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_voxel_moves() {
        let dims = Dims3::new(10, 10, 10);
        let mut v = Volume::zeros(dims);
        v.set(5, 5, 5, 1.0);
        let t = translate(&v, [2, 0, 0]).unwrap();
        assert_eq!(t.get(7, 5, 5), 1.0);
        assert_eq!(t.voxels().iter().sum::<f32>(), 1.0);
        let t = translate(&v, [-2, 2, -2]).unwrap();
        assert_eq!(t.get(3, 7, 3), 1.0);
    }

    #[test]
    fn zero_offset_is_identity() {
        let dims = Dims3::new(3, 4, 5);
        let v = Volume::new(dims, (0..60).map(|i| i as f32).collect()).unwrap();
        assert_eq!(translate(&v, [0, 0, 0]).unwrap(), v);
    }

    #[test]
    fn oversized_offset_rejected() {
        let v = Volume::zeros(Dims3::new(2, 5, 5));
        assert!(matches!(translate(&v, [2, 0, 0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn expansion_counts() {
        let dims = Dims3::new(5, 5, 5);
        let pair = LabeledPair {
            id: "s".into(),
            left: Volume::zeros(dims),
            right: Volume::zeros(dims),
            label: 1,
        };
        assert_eq!(augment_dataset(&[]).unwrap().len(), 0);
        let one = augment_dataset(std::slice::from_ref(&pair)).unwrap();
        assert_eq!(one.len(), 26);
        assert!(one.iter().all(|r| r.label == 1));
    }
}
