use crate::error::{Error, Result};
use crate::tensor::Volume;

/// Per-volume z-score: `(v - mean) / std` with the population standard
/// deviation over all voxels.
pub fn normalize_intensity(volume: &Volume) -> Result<Volume> {
    let v = volume.voxels();
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) || !(std / (mean.abs() + std) > 1e-12) {
        return Err(Error::Normalization(format!(
            "volume {} has zero intensity variance",
            volume.dims()
        )));
    }
    let out = v.iter().map(|&x| ((x as f64 - mean) / std) as f32).collect();
    Volume::new(volume.dims(), out)
}
