//! Named-tensor checkpoint container.
//!
//! ```text
//! magic "RSCK" | version u32 | header length u64 | JSON header | f32 payload
//! ```
//!
//! All integers and floats are little-endian. The header records the network
//! config, its hash, the dtype, every tensor's name/shape/offset and a SHA-256
//! of the payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::net::{NetConfig, NetworkParams, TensorEntry};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RSCK";
const VERSION: u32 = 1;
const PREFIX_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    config_hash: String,
    dtype: String,
    tensors: Vec<TensorEntry>,
    payload_sha256: String,
}

fn encode(params: &NetworkParams) -> Vec<u8> {
    let payload: Vec<u8> = params.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = Header {
        config: params.config().clone(),
        config_hash: params.config().hash(),
        dtype: "f32".into(),
        tensors: params.layout().entries.clone(),
        payload_sha256: crate::sha256_hex(&payload),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + payload.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

fn decode(bytes: &[u8], expected: Option<&NetConfig>) -> Result<NetworkParams, TrainError> {
    let corrupt = |m: String| TrainError::Corrupt(m);
    if bytes.len() < PREFIX_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(corrupt("missing RSCK magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(PREFIX_LEN))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("header length exceeds file".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[PREFIX_LEN..header_end]).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.dtype != "f32" {
        return Err(corrupt(format!("unsupported dtype {}", header.dtype)));
    }
    if header.config.hash() != header.config_hash {
        return Err(corrupt("stored config does not match its hash".into()));
    }
    if let Some(cfg) = expected {
        if cfg.hash() != header.config_hash {
            return Err(TrainError::ConfigMismatch { expected: cfg.hash(), found: header.config_hash });
        }
    }
    let payload = &bytes[header_end..];
    if crate::sha256_hex(payload) != header.payload_sha256 {
        return Err(corrupt("payload checksum mismatch".into()));
    }
    if !payload.len().is_multiple_of(4) {
        return Err(corrupt("payload is not a whole number of f32 values".into()));
    }
    let values: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let params = NetworkParams::from_values(&header.config, values).map_err(|e| corrupt(e.to_string()))?;
    if params.layout().entries != header.tensors {
        return Err(corrupt("tensor table does not match the config's layout".into()));
    }
    Ok(params)
}

pub fn checkpoint_save(params: &NetworkParams, path: impl AsRef<Path>) -> Result<(), TrainError> {
    std::fs::write(path, encode(params))?;
    Ok(())
}

/// Loads a checkpoint. With `expected`, the stored config hash must match it.
pub fn checkpoint_load(path: impl AsRef<Path>, expected: Option<&NetConfig>) -> Result<NetworkParams, TrainError> {
    decode(&std::fs::read(path)?, expected)
}
