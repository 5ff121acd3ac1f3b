//! `VOL3` volume container: magic, three u32 LE dims (x, y, z), then f32 LE
//! voxels in x-fastest order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dims3, Volume};

pub const VOLUME_MAGIC: &[u8; 4] = b"VOL3";
const HEADER_LEN: usize = 16;

pub fn encode_volume(volume: &Volume) -> Vec<u8> {
    let d = volume.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * d.len());
    out.extend_from_slice(VOLUME_MAGIC);
    for n in d.as_array() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in volume.voxels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < 4 {
        return Err(Error::parse(
            0,
            format!("file too short for magic ({} bytes)", bytes.len()),
        ));
    }
    if &bytes[..4] != VOLUME_MAGIC {
        return Err(Error::parse(
            0,
            format!(
                "bad magic \"{}\", expected \"VOL3\"",
                String::from_utf8_lossy(&bytes[..4])
            ),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(4, "truncated header: missing dims"));
    }
    let u = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
    let (x, y, z) = (u(4), u(8), u(12));
    if x == 0 || y == 0 || z == 0 {
        return Err(Error::parse(4, format!("dims {x}x{y}x{z} must be positive")));
    }
    let count = x
        .checked_mul(y)
        .and_then(|n| n.checked_mul(z))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::parse(4, format!("dims {x}x{y}x{z} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::parse(
            HEADER_LEN as u64,
            format!(
                "payload length mismatch: dims {x}x{y}x{z} need {} bytes, found {}",
                count * 4,
                payload.len()
            ),
        ));
    }
    let voxels: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
        return Err(Error::parse((HEADER_LEN + 4 * i) as u64, "non-finite voxel"));
    }
    Volume::new(Dims3::new(x, y, z), voxels)
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_volume(volume: &Volume, path: &Path) -> Result<()> {
    std::fs::write(path, encode_volume(volume)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bit_exact() {
        let d = Dims3::new(3, 2, 4);
        let v = Volume::new(d, (0..24).map(|i| (i as f32).sin() * 1e-3).collect()).unwrap();
        assert_eq!(decode_volume(&encode_volume(&v)).unwrap(), v);
    }

    #[test]
    fn bad_magic_is_named() {
        let mut b = encode_volume(&Volume::zeros(Dims3::new(1, 1, 1)));
        b[3] = b'2';
        let e = decode_volume(&b).unwrap_err();
        assert!(
            matches!(&e, Error::Parse { offset: 0, message } if message.contains("VOL2")),
            "{e}"
        );
    }

    #[test]
    fn truncated_payload() {
        let b = encode_volume(&Volume::zeros(Dims3::new(29, 21, 55)));
        let e = decode_volume(&b[..b.len() - 7]).unwrap_err();
        assert!(matches!(&e, Error::Parse { offset: 16, message } if message.contains("length mismatch")));
    }

    #[test]
    fn overflowing_dims() {
        let mut b = b"VOL3".to_vec();
        for _ in 0..3 {
            b.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode_volume(&b), Err(Error::Parse { offset: 4, .. })));
    }
}
