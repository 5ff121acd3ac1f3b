//! `HPNET1` model container.
//!
//! Layout (all integers u32 little-endian):
//! magic `HPNET1` | version | config length | config text (`key=value` lines)
//! | tensor count | per tensor: name length, name, rank, dims..., f32 LE values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::network::config::NetConfig;
use crate::network::params::{build_network, NetworkParams};

pub const MODEL_MAGIC: &[u8; 6] = b"HPNET1";
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serializes parameters and configuration.
pub fn write_model(params: &NetworkParams<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_FORMAT_VERSION);
    let cfg = params.config.to_kv();
    put_u32(&mut out, cfg.len() as u32);
    out.extend_from_slice(cfg.as_bytes());
    let tensors = params.tensors();
    put_u32(&mut out, tensors.len() as u32);
    for t in tensors {
        put_u32(&mut out, t.name.len() as u32);
        out.extend_from_slice(t.name.as_bytes());
        put_u32(&mut out, t.shape.len() as u32);
        for &d in &t.shape {
            put_u32(&mut out, d as u32);
        }
        for v in t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Load(format!(
                "truncated model file: need {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a model container produced by [`write_model`].
pub fn read_model(bytes: &[u8]) -> Result<NetworkParams<f32>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic = c.take(MODEL_MAGIC.len(), "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::Load(format!(
            "bad magic {:?}, expected \"HPNET1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = c.u32("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Load(format!(
            "unsupported model format version {version} (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let cfg_len = c.u32("config length")? as usize;
    let cfg_text =
        std::str::from_utf8(c.take(cfg_len, "config")?).map_err(|_| Error::Load("config block is not UTF-8".into()))?;
    let kv: BTreeMap<String, String> = cfg_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Load(format!("bad config line '{l}'")))
        })
        .collect::<Result<_>>()?;
    let config = NetConfig::from_kv(&kv)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(0);
    let mut params: NetworkParams<f32> = build_network(&config, &mut rng)?;

    let count = c.u32("tensor count")? as usize;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(Error::Shape(format!(
            "model declares {count} tensors, configuration implies {}",
            slots.len()
        )));
    }
    for slot in slots.iter_mut() {
        let name_len = c.u32("name length")? as usize;
        let name = String::from_utf8_lossy(c.take(name_len, "tensor name")?).into_owned();
        if name != slot.name {
            return Err(Error::Load(format!("expected tensor '{}', found '{name}'", slot.name)));
        }
        let rank = c.u32("rank")? as usize;
        let shape = (0..rank)
            .map(|_| c.u32("dim").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if shape != slot.shape {
            return Err(Error::Shape(format!(
                "tensor '{name}' declares shape {shape:?}, configuration implies {:?}",
                slot.shape
            )));
        }
        let raw = c.take(slot.values.len() * 4, &name)?;
        for (v, b) in slot.values.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        if slot.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Load(format!("tensor '{name}' contains non-finite values")));
        }
        if name.ends_with("running_var") && slot.values.iter().any(|&v| v <= 0.0) {
            return Err(Error::Load(format!("tensor '{name}' has non-positive variance")));
        }
    }
    drop(slots);
    if c.pos != bytes.len() {
        return Err(Error::Load(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - c.pos
        )));
    }
    Ok(params)
}

pub fn save_model(params: &NetworkParams<f32>, path: &Path) -> Result<()> {
    let bytes = write_model(params);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NetworkParams<f32>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
