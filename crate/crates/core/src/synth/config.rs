use crate::data::Label;
use crate::error::{Error, Result};
use crate::network::config::DEFAULT_INPUT_DIMS;
use crate::pipeline::{get_or, KvConfig};
use crate::tensor::Dims3;

/// Exact number of subjects per diagnostic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub nc: usize,
    pub ad: usize,
    pub mci: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.nc + self.ad + self.mci
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Subject count when `counts` is `None`; severities are then uniform on
    /// `[0, 1]` and labels follow the thresholds.
    pub n: usize,
    /// Class quotas; each subject's severity is uniform within its class band.
    pub counts: Option<ClassCounts>,
    pub seed: u64,
    pub dims: Dims3,
    pub base_intensity: f64,
    pub noise_std: f64,
    /// Intensity removed at the bump peak for severity 1.
    pub atrophy: f64,
    /// Baseline hazard per month.
    pub lambda0: f64,
    /// Log-hazard per unit severity.
    pub theta: f64,
    /// Uniform censoring window in months.
    pub censor_window: (f64, f64),
    /// NC below this severity.
    pub nc_threshold: f64,
    /// AD above this severity.
    pub ad_threshold: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 100,
            counts: None,
            seed: 0,
            dims: DEFAULT_INPUT_DIMS,
            base_intensity: 100.0,
            noise_std: 5.0,
            atrophy: 60.0,
            lambda0: 0.01,
            theta: 2.5,
            censor_window: (12.0, 72.0),
            nc_threshold: 0.3,
            ad_threshold: 0.7,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.base_intensity,
            self.noise_std,
            self.atrophy,
            self.lambda0,
            self.theta,
            self.censor_window.0,
            self.censor_window.1,
        ]
        .iter()
        .all(|v| v.is_finite());
        let ok = finite
            && self.base_intensity > 0.0
            && self.noise_std > 0.0
            && self.atrophy >= 0.0
            && self.lambda0 > 0.0
            && self.theta >= 0.0
            && self.censor_window.0 > 0.0
            && self.censor_window.0 <= self.censor_window.1
            && 0.0 < self.nc_threshold
            && self.nc_threshold < self.ad_threshold
            && self.ad_threshold < 1.0
            && self.dims.x >= 2
            && self.dims.y >= 2
            && self.dims.z >= 2;
        if !ok {
            return Err(Error::Config(format!("invalid generator configuration {self:?}")));
        }
        Ok(())
    }

    pub fn label_for(&self, s: f64) -> Label {
        if s < self.nc_threshold {
            Label::Nc
        } else if s > self.ad_threshold {
            Label::Ad
        } else {
            Label::Mci
        }
    }

    /// Severity band of a class.
    pub fn severity_range(&self, label: Label) -> (f64, f64) {
        match label {
            Label::Nc => (0.0, self.nc_threshold),
            Label::Mci => (self.nc_threshold, self.ad_threshold),
            Label::Ad => (self.ad_threshold, 1.0),
        }
    }

    pub fn subject_count(&self) -> usize {
        self.counts.map_or(self.n, |c| c.total())
    }

    /// Reads generator keys from a flat config; absent keys keep defaults.
    /// Quotas are enabled when any of `n_nc`, `n_ad`, `n_mci` is present.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = GenConfig::default();
        let counts = if ["n_nc", "n_ad", "n_mci"].iter().any(|k| kv.contains_key(*k)) {
            Some(ClassCounts {
                nc: get_or(kv, "n_nc", 0)?,
                ad: get_or(kv, "n_ad", 0)?,
                mci: get_or(kv, "n_mci", 0)?,
            })
        } else {
            None
        };
        let dims = match kv.get("dims") {
            None => d.dims,
            Some(v) => {
                let parts: Vec<usize> = v
                    .split(['x', ','])
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("dims: cannot parse '{v}'")))?;
                if parts.len() != 3 {
                    return Err(Error::Config(format!("dims: expected 3 values, got '{v}'")));
                }
                Dims3::new(parts[0], parts[1], parts[2])
            }
        };
        let cfg = GenConfig {
            n: get_or(kv, "n", d.n)?,
            counts,
            seed: get_or(kv, "seed", d.seed)?,
            dims,
            base_intensity: get_or(kv, "base_intensity", d.base_intensity)?,
            noise_std: get_or(kv, "noise_std", d.noise_std)?,
            atrophy: get_or(kv, "atrophy", d.atrophy)?,
            lambda0: get_or(kv, "lambda0", d.lambda0)?,
            theta: get_or(kv, "theta", d.theta)?,
            censor_window: (
                get_or(kv, "censor_min", d.censor_window.0)?,
                get_or(kv, "censor_max", d.censor_window.1)?,
            ),
            nc_threshold: get_or(kv, "nc_threshold", d.nc_threshold)?,
            ad_threshold: get_or(kv, "ad_threshold", d.ad_threshold)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
