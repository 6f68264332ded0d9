//! Weight file layout (all integers little-endian `u32`):
//!
//! ```text
//! "NDCW" | version | layer count L | L x (in, out) | f32 payload
//! ```
//!
//! The payload is layer by layer: row-major `in x out` weights, then biases.

use super::{MlpParams, NnError};

const MAGIC: &[u8; 4] = b"NDCW";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_weights(params: &MlpParams<f32>) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(12 + 8 * dims.len() + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.num_layers() as u32).to_le_bytes());
    for w in dims.windows(2) {
        out.extend_from_slice(&(w[0] as u32).to_le_bytes());
        out.extend_from_slice(&(w[1] as u32).to_le_bytes());
    }
    for x in params.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn read_weights(bytes: &[u8]) -> Result<MlpParams<f32>, NnError> {
    let mut pos = 0usize;
    let mut u32_at = |what: &str| -> Result<u32, NnError> {
        let b = bytes.get(pos..pos + 4).ok_or_else(|| bad(format!("truncated while reading {what}")))?;
        pos += 4;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(bad("missing NDCW magic"));
    }
    let _ = u32_at("magic")?;
    let version = u32_at("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let layers = u32_at("layer count")? as usize;
    if layers == 0 || layers > 1024 {
        return Err(bad(format!("implausible layer count {layers}")));
    }
    let mut dims = Vec::with_capacity(layers + 1);
    for l in 0..layers {
        let i = u32_at("layer table")? as usize;
        let o = u32_at("layer table")? as usize;
        if l == 0 {
            dims.push(i);
        } else if dims[l] != i {
            return Err(bad(format!("layer {l} input {i} does not chain with previous output {}", dims[l])));
        }
        dims.push(o);
    }
    let payload = &bytes[pos..];
    if payload.len() % 4 != 0 {
        return Err(bad("payload is not a whole number of f32 values"));
    }
    let data: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    MlpParams::from_parts(&dims, data).map_err(|e| bad(e.to_string()))
}
