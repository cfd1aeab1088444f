//! Checkpoint container: a UTF-8 JSON header, the ASCII marker `WGTS`, then
//! every parameter as little-endian `f32`, in the order the header declares.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::NnError;

pub const WEIGHTS_MARKER: &[u8; 4] = b"WGTS";

pub fn encode_checkpoint<'a, H: Serialize>(
    header: &H,
    params: impl IntoIterator<Item = &'a [f64]>,
) -> Result<Vec<u8>, NnError> {
    let mut out = serde_json::to_vec(header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    out.extend_from_slice(WEIGHTS_MARKER);
    for p in params {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits a checkpoint into its header and the flat weight blob.
pub fn decode_checkpoint<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f64>), NnError> {
    let mut stream = serde_json::Deserializer::from_slice(bytes).into_iter::<H>();
    let header = stream
        .next()
        .ok_or_else(|| NnError::Checkpoint("missing JSON header".into()))?
        .map_err(|e| NnError::Checkpoint(format!("bad header: {e}")))?;
    let offset = stream.byte_offset();
    let rest = &bytes[offset..];
    if rest.len() < 4 || &rest[..4] != WEIGHTS_MARKER {
        return Err(NnError::Checkpoint("missing WGTS marker after header".into()));
    }
    let blob = &rest[4..];
    if !blob.len().is_multiple_of(4) {
        return Err(NnError::Checkpoint(format!(
            "weight blob of {} bytes is not a whole number of f32 values",
            blob.len()
        )));
    }
    let weights = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((header, weights))
}
