use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layers::pooled_dims;
use crate::tensor::Dims3;

/// Canonical hippocampal crop size.
pub const DEFAULT_INPUT_DIMS: Dims3 = Dims3::new(29, 21, 55);

/// Number of residual blocks per stream.
pub const NUM_BLOCKS: usize = 3;

/// Architecture hyper-parameters of the two-stream network.
///
/// Stage indices used by `pool_after`: `0` is the stem convolution and
/// `1..=3` are the residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub stem_kernels: usize,
    pub block_kernels: [usize; NUM_BLOCKS],
    pub kernel_size: [usize; 3],
    pub pool_after: Vec<usize>,
    pub dropout_ratio: f64,
    pub num_classes: usize,
    pub input_dims: Dims3,
    /// Multiplier on every channel count, as `(numerator, denominator)`.
    pub scale_factor: (u32, u32),
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            stem_kernels: 32,
            block_kernels: [32, 64, 128],
            kernel_size: [3, 3, 3],
            pool_after: vec![0, 1, 2],
            dropout_ratio: 0.5,
            num_classes: 2,
            input_dims: DEFAULT_INPUT_DIMS,
            scale_factor: (1, 1),
        }
    }
}

fn scale(c: usize, (num, den): (u32, u32)) -> usize {
    ((c * num as usize) / den as usize).max(1)
}

/// Parses `"1/8"`, `"0.125"` or `"2"` into a reduced positive ratio.
pub fn parse_scale(s: &str) -> Result<(u32, u32)> {
    let s = s.trim();
    let bad = || Error::Config(format!("invalid scale factor '{s}'"));
    let (num, den) = if let Some((a, b)) = s.split_once('/') {
        (
            a.trim().parse::<u32>().map_err(|_| bad())?,
            b.trim().parse::<u32>().map_err(|_| bad())?,
        )
    } else if let Ok(n) = s.parse::<u32>() {
        (n, 1)
    } else {
        let f: f64 = s.parse().map_err(|_| bad())?;
        let den = 1_000_000u32;
        ((f * den as f64).round() as u32, den)
    };
    if num == 0 || den == 0 {
        return Err(bad());
    }
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl NetConfig {
    /// Default architecture with all channel counts multiplied by `scale`.
    pub fn scaled(scale: (u32, u32)) -> Self {
        NetConfig {
            scale_factor: scale,
            ..NetConfig::default()
        }
    }

    pub fn stem_channels(&self) -> usize {
        scale(self.stem_kernels, self.scale_factor)
    }

    pub fn block_channels(&self) -> [usize; NUM_BLOCKS] {
        self.block_kernels.map(|c| scale(c, self.scale_factor))
    }

    /// Length of the concatenated two-stream GAP feature vector.
    pub fn feature_dim(&self) -> usize {
        2 * self.block_channels()[NUM_BLOCKS - 1]
    }

    /// Spatial dims seen by each stage's convolutions, plus the final grid.
    pub fn stage_dims(&self) -> Result<(Vec<Dims3>, Dims3)> {
        let mut d = self.input_dims;
        let mut stages = Vec::with_capacity(NUM_BLOCKS + 1);
        for stage in 0..=NUM_BLOCKS {
            stages.push(d);
            if self.pool_after.contains(&stage) {
                d = pooled_dims(d).map_err(|_| {
                    Error::Config(format!(
                        "input {} collapses below 1 voxel after pooling at stage {stage}",
                        self.input_dims
                    ))
                })?;
            }
        }
        Ok((stages, d))
    }

    /// Spatial dims of the final-stage maps that feed global average pooling.
    pub fn final_dims(&self) -> Result<Dims3> {
        Ok(self.stage_dims()?.1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stem_kernels == 0 || self.block_kernels.contains(&0) {
            return Err(Error::Config("kernel counts must be positive".into()));
        }
        if self.kernel_size.contains(&0) || self.kernel_size.iter().any(|k| k % 2 == 0) {
            return Err(Error::Config("kernel sizes must be odd and positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_ratio) {
            return Err(Error::Config(format!(
                "dropout ratio {} outside [0, 1)",
                self.dropout_ratio
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.scale_factor.0 == 0 || self.scale_factor.1 == 0 {
            return Err(Error::Config("scale factor must be positive".into()));
        }
        if self.pool_after.iter().any(|&s| s > NUM_BLOCKS) {
            return Err(Error::Config("pool_after stage index out of range".into()));
        }
        if self.input_dims.is_empty() {
            return Err(Error::Config("input dims must be positive".into()));
        }
        self.stage_dims()?;
        Ok(())
    }

    /// Flat `key=value` rendering, one entry per line, keys sorted.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let bk = self.block_kernels;
        let ks = self.kernel_size;
        let d = self.input_dims;
        let pools: Vec<String> = self.pool_after.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "block_kernels={},{},{}", bk[0], bk[1], bk[2]);
        let _ = writeln!(s, "dropout_ratio={}", self.dropout_ratio);
        let _ = writeln!(s, "input_dims={},{},{}", d.x, d.y, d.z);
        let _ = writeln!(s, "kernel_size={},{},{}", ks[0], ks[1], ks[2]);
        let _ = writeln!(s, "num_classes={}", self.num_classes);
        let _ = writeln!(s, "pool_after={}", pools.join(","));
        let _ = writeln!(s, "scale_factor={}/{}", self.scale_factor.0, self.scale_factor.1);
        let _ = writeln!(s, "stem_kernels={}", self.stem_kernels);
        s
    }

    /// Builds a config from `key=value` pairs; absent keys keep defaults.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = NetConfig::default();
        for (k, v) in kv {
            match k.as_str() {
                "stem_kernels" => c.stem_kernels = parse_usize(k, v)?,
                "block_kernels" => c.block_kernels = parse_triple(k, v)?,
                "kernel_size" => c.kernel_size = parse_triple(k, v)?,
                "pool_after" => {
                    c.pool_after = if v.trim().is_empty() {
                        Vec::new()
                    } else {
                        v.split(',').map(|p| parse_usize(k, p)).collect::<Result<_>>()?
                    }
                }
                "dropout_ratio" => {
                    c.dropout_ratio = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("{k}: bad number '{v}'")))?
                }
                "num_classes" => c.num_classes = parse_usize(k, v)?,
                "input_dims" => {
                    let [x, y, z] = parse_triple(k, v)?;
                    c.input_dims = Dims3::new(x, y, z);
                }
                "scale_factor" => c.scale_factor = parse_scale(v)?,
                _ => {}
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_usize(k: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{k}: expected a non-negative integer, got '{v}'")))
}

fn parse_triple(k: &str, v: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = v.split(',').map(|p| parse_usize(k, p)).collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| Error::Config(format!("{k}: expected three comma-separated values")))
}
