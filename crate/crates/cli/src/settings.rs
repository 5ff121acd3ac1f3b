//! Config-file values merged with command-line overrides.

use std::str::FromStr;

use hippoprog::pipeline::{get_or, read_kv, KvConfig};

use crate::error::{usage, CliError};
use crate::Common;

pub struct Settings {
    pub kv: KvConfig,
    pub seed: u64,
}

impl Settings {
    pub fn load(common: &Common) -> Result<Self, CliError> {
        let mut kv = match &common.config {
            Some(p) => read_kv(p)?,
            None => KvConfig::new(),
        };
        if let Some(s) = common.seed {
            kv.insert("seed".into(), s.to_string());
        }
        let seed = get_or(&kv, "seed", 0u64)?;
        Ok(Settings { kv, seed })
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(get_or(&self.kv, key, default)?)
    }

    /// Flag value if given, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self.get(key, default),
        }
    }

    pub fn text<'a>(&'a self, flag: Option<&'a str>, key: &str) -> Option<&'a str> {
        flag.or_else(|| self.kv.get(key).map(String::as_str))
    }
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_horizons(s: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(s) = s else { return Ok(Vec::new()) };
    parse_list(s)
        .iter()
        .map(|h| match h.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(usage(format!("horizon '{h}' is not a positive number of months"))),
        })
        .collect()
}
