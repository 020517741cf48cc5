//! Checkpoint file: a JSON manifest followed by a flat parameter blob.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! bytes 0..8    magic "NWACKPT1"
//! u64           manifest length in bytes
//! [u8]          manifest, UTF-8 JSON
//! u64           parameter count
//! [f64]         parameters, IEEE-754 binary64
//! ```

use super::NnError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"NWACKPT1";

pub fn encode_checkpoint<M: Serialize>(manifest: &M, params: &[f64]) -> Result<Vec<u8>, NnError> {
    let json = serde_json::to_vec(manifest).map_err(|e| NnError::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(24 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8], NnError> {
    if bytes.len() < n {
        return Err(NnError::Format(format!("checkpoint truncated while reading {what}")));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn read_u64(bytes: &mut &[u8], what: &str) -> Result<u64, NnError> {
    Ok(u64::from_le_bytes(take(bytes, 8, what)?.try_into().expect("8 bytes")))
}

pub fn decode_checkpoint<M: DeserializeOwned>(mut bytes: &[u8]) -> Result<(M, Vec<f64>), NnError> {
    if take(&mut bytes, 8, "magic")? != MAGIC {
        return Err(NnError::Format("not a checkpoint file (bad magic)".into()));
    }
    let len = read_u64(&mut bytes, "manifest length")? as usize;
    let json = take(&mut bytes, len, "manifest")?;
    let manifest = serde_json::from_slice(json).map_err(|e| NnError::Format(format!("manifest: {e}")))?;
    let count = read_u64(&mut bytes, "parameter count")? as usize;
    let blob = take(&mut bytes, count.checked_mul(8).ok_or_else(|| NnError::Format("bad count".into()))?, "parameters")?;
    if !bytes.is_empty() {
        return Err(NnError::Format(format!("{} trailing bytes after parameters", bytes.len())));
    }
    let params = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((manifest, params))
}

pub fn write_checkpoint<M: Serialize>(path: &Path, manifest: &M, params: &[f64]) -> Result<(), NnError> {
    let bytes = encode_checkpoint(manifest, params)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint<M: DeserializeOwned>(path: &Path) -> Result<(M, Vec<f64>), NnError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
