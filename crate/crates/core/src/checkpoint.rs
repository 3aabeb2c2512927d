//! Checkpoint container: a little-endian `u64` header length, a JSON header
//! (version, task kind, config, RNG position, tensor directory, payload
//! checksum), then the raw little-endian `f64` payload.
//!
//! The header is human-inspectable with `head -c`, the payload is a plain
//! dump of every parameter in insertion order, and the whole file is written
//! atomically (temp + rename) so an interrupted run never leaves a readable
//! partial checkpoint. Saving the same state twice produces byte-identical
//! files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::ParamStore;
use crate::config::Config;
use crate::rng::RngState;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// One tensor's slot in the payload; `offset` and `len` count `f64`
/// elements, not bytes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub kind: String,
    pub config: Config,
    pub rng: RngState,
    pub tensors: Vec<TensorEntry>,
    pub payload_sha256: String,
}

/// A parsed and checksum-verified checkpoint.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub header: CheckpointHeader,
    payload: Vec<f64>,
}

/// Write `bytes` to `path` atomically: write a sibling temp file, then
/// rename over the destination.
pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .map_err(|e| Error::io(format!("write {}", tmp.display()), e))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| Error::io(format!("rename {} -> {}", tmp.display(), path.display()), e))?;
    Ok(())
}

/// Serialize every parameter of `store` (in insertion order) plus the run's
/// config and RNG state into a checkpoint file at `path`.
pub fn save(
    path: &Path,
    kind: &str,
    config: &Config,
    rng: RngState,
    store: &ParamStore,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<f64> = Vec::with_capacity(store.scalar_count());
    for (_, name, t) in store.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: payload.len(),
            len: t.len(),
        });
        payload.extend_from_slice(t.data());
    }
    let mut payload_bytes = Vec::with_capacity(payload.len() * 8);
    for v in &payload {
        payload_bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut hasher = Sha256::new();
    hasher.update(&payload_bytes);
    let digest = hasher.finalize();
    let mut sha = String::with_capacity(64);
    for b in digest {
        sha.push_str(&format!("{b:02x}"));
    }

    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        config: config.clone(),
        rng,
        tensors,
        payload_sha256: sha,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("encode checkpoint header: {e}")))?;

    let mut bytes = Vec::with_capacity(8 + header_json.len() + payload_bytes.len());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&payload_bytes);
    atomic_write_bytes(path, &bytes)
}

/// Read, parse, and checksum-verify a checkpoint.
pub fn load(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    if bytes.len() < 8 {
        return Err(Error::Format(format!("{}: too short for a checkpoint", path.display())));
    }
    let header_len = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() < header_len {
        return Err(Error::Format(format!(
            "{}: truncated header (need {header_len} bytes, have {})",
            path.display(),
            body.len()
        )));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::Format(format!("{}: header: {e}", path.display())))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            path.display(),
            header.version
        )));
    }
    let payload_bytes = &body[header_len..];
    if payload_bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: payload is {} bytes, not a whole number of doubles",
            path.display(),
            payload_bytes.len()
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(payload_bytes);
    let digest = hasher.finalize();
    let mut sha = String::with_capacity(64);
    for b in digest {
        sha.push_str(&format!("{b:02x}"));
    }
    if sha != header.payload_sha256 {
        return Err(Error::Format(format!(
            "{}: payload checksum mismatch (file may be truncated or corrupted)",
            path.display()
        )));
    }
    let payload: Vec<f64> = payload_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    for e in &header.tensors {
        let numel: usize = e.shape.iter().product();
        if numel != e.len || e.offset + e.len > payload.len() {
            return Err(Error::Format(format!(
                "{}: tensor '{}' directory entry is inconsistent with the payload",
                path.display(),
                e.name
            )));
        }
    }
    Ok(LoadedCheckpoint { header, payload })
}

impl LoadedCheckpoint {
    /// Extract one named tensor.
    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let e = self
            .header
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no tensor '{name}'")))?;
        Tensor::new(e.shape.clone(), self.payload[e.offset..e.offset + e.len].to_vec())
    }

    /// Copy every stored tensor into the matching (same name, same shape)
    /// parameter of `store`. The store must contain exactly the checkpoint's
    /// parameter set — a freshly built model of the same architecture.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.header.tensors.len() {
            return Err(Error::Contract(format!(
                "checkpoint holds {} tensors but the model has {} parameters",
                self.header.tensors.len(),
                store.len()
            )));
        }
        let ids = store.ids();
        for id in ids {
            let name = store.name(id).to_string();
            let t = self.tensor(&name).map_err(|_| {
                Error::Contract(format!("checkpoint is missing parameter '{name}'"))
            })?;
            if t.shape() != store.get(id).shape() {
                return Err(Error::Contract(format!(
                    "parameter '{name}' is {:?} in the checkpoint but {:?} in the model",
                    t.shape(),
                    store.get(id).shape()
                )));
            }
            *store.get_mut(id) = t;
        }
        Ok(())
    }

    /// Byte-identity helper: the stored tensors of the `g.*` namespace (used
    /// to verify two checkpoints share the same basis).
    pub fn namespace_bits(&self, prefix: &str) -> Vec<(String, Vec<u64>)> {
        let mut out = Vec::new();
        for e in &self.header.tensors {
            if e.name.starts_with(prefix) {
                let bits =
                    self.payload[e.offset..e.offset + e.len].iter().map(|v| v.to_bits()).collect();
                out.push((e.name.clone(), bits));
            }
        }
        out
    }
}
