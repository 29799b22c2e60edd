//! SALM: the raw saliency-map interchange format.
//!
//! Layout, all little-endian:
//! ```text
//! bytes 0..4   magic "SALM"
//! byte  4      format version (1)
//! bytes 5..9   height, u32
//! bytes 9..13  width, u32
//! bytes 13..   row-major f32 payload, exactly height * width values
//! ```
//! The payload is float32, so a map round-trips bit-exactly whenever its
//! values are f32-representable (which every map loaded from disk is).

use crate::error::{Error, Result};
use crate::types::SaliencyMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SALM";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 13;

/// Serialize a map to its SALM byte representation.
pub fn saliency_to_bytes(map: &SaliencyMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for &v in map.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parse a SALM byte buffer.
pub fn saliency_from_bytes(bytes: &[u8], origin: &str) -> Result<SaliencyMap> {
    let fmt_err = |msg: String| Error::Data(format!("{origin}: {msg}"));
    if bytes.len() < HEADER_LEN {
        return Err(fmt_err(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fmt_err("bad magic, not a SALM file".into()));
    }
    if bytes[4] != VERSION {
        return Err(fmt_err(format!("unsupported format version {}", bytes[4])));
    }
    let height = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + height.checked_mul(width).and_then(|n| n.checked_mul(4)).ok_or_else(
        || fmt_err(format!("implausible dimensions {height}x{width}")),
    )?;
    if bytes.len() != expected {
        return Err(fmt_err(format!(
            "payload length {} does not match {height}x{width} (expected {expected} bytes total)",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    SaliencyMap::new(height, width, data).map_err(|e| fmt_err(e.to_string()))
}

pub fn save_saliency(map: &SaliencyMap, path: &Path) -> Result<()> {
    super::write_atomic(path, &saliency_to_bytes(map))
}

pub fn load_saliency(path: &Path) -> Result<SaliencyMap> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    saliency_from_bytes(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f32_map(h: usize, w: usize, seed: u64) -> SaliencyMap {
        let mut rng = crate::rng::SplitMix64::new(seed);
        SaliencyMap::new(
            h,
            w,
            (0..h * w).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32 as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.salm");
        let map = f32_map(5, 7, 8);
        save_saliency(&map, &path).unwrap();
        let back = load_saliency(&path).unwrap();
        assert_eq!(map, back);
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.salm");
        let map = SaliencyMap::zeros(3, 4);
        save_saliency(&map, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 13 + 3 * 4 * 4);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let map = f32_map(4, 4, 9);
        let mut bytes = saliency_to_bytes(&map);
        bytes.truncate(bytes.len() - 3);
        let err = saliency_from_bytes(&bytes, "test").unwrap_err();
        assert!(err.to_string().contains("payload length"), "{err}");
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let map = f32_map(2, 2, 10);
        let mut bytes = saliency_to_bytes(&map);
        bytes[0] = b'X';
        assert!(saliency_from_bytes(&bytes, "t").is_err());
        let mut bytes = saliency_to_bytes(&map);
        bytes[4] = 9;
        assert!(saliency_from_bytes(&bytes, "t").is_err());
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = saliency_to_bytes(&f32_map(2, 2, 11));
        bytes.push(0);
        assert!(saliency_from_bytes(&bytes, "t").is_err());
    }
}
