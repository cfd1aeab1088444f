//! Feature cache layout (all integers little-endian):
//!
//! ```text
//! "AFEA" | version u16 | kind u8 | ndim u8 | dims u32 × ndim | f32 payload, row-major
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureError, FeatureKind, FeatureMatrix};

pub const CACHE_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"AFEA";

pub fn encode_features(fm: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + fm.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.push(fm.kind.code());
    out.push(2);
    out.extend_from_slice(&(fm.feature_dim as u32).to_le_bytes());
    out.extend_from_slice(&(fm.n_frames as u32).to_le_bytes());
    for v in &fm.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], clip_id: impl Into<String>) -> Result<FeatureMatrix, FeatureError> {
    let bad = |m: &str| FeatureError::Cache(m.to_string());
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing AFEA magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CACHE_VERSION {
        return Err(FeatureError::Cache(format!("unsupported version {version}")));
    }
    let kind = FeatureKind::from_code(bytes[6])
        .ok_or_else(|| FeatureError::Cache(format!("unknown kind code {}", bytes[6])))?;
    let ndim = bytes[7] as usize;
    if ndim != 2 {
        return Err(FeatureError::Cache(format!("expected 2 dims, found {ndim}")));
    }
    let header = 8 + 4 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated dims"));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    let count = dims.iter().product::<usize>();
    if bytes.len() != header + 4 * count {
        return Err(FeatureError::Cache(format!(
            "payload is {} bytes, expected {}",
            bytes.len() - header,
            4 * count
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(FeatureMatrix::new(kind, clip_id, dims[0], dims[1], data))
}

pub fn write_features(fm: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    fs::write(path, encode_features(fm)).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a cache file; the clip id is the file stem.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix, FeatureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_features(&bytes, id)
}
