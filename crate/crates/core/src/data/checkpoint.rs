//! Binary checkpoint format.
//!
//! Layout: the magic bytes `VRCK`, a little-endian `u64` header length, a
//! JSON header (schema version, model config, tensor table), then raw
//! little-endian `f64` tensor data. Each tensor carries a SHA-256 of its
//! bytes so corruption is reported instead of silently loaded.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::params::ParamStore;

pub const MAGIC: &[u8; 4] = b"VRCK";
pub const SCHEMA_VERSION: &str = "veracity-checkpoint/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: (usize, usize),
    /// Byte offset into the data section.
    offset: usize,
    /// Byte length.
    len: usize,
    sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    version: String,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

pub fn to_bytes(params: &ModelParams) -> Result<Vec<u8>> {
    let mut data = Vec::with_capacity(params.store.num_scalars() * 8);
    let mut tensors = Vec::with_capacity(params.store.len());
    for (name, t) in params.store.iter() {
        let offset = data.len();
        for &x in t.iter() {
            data.extend_from_slice(&x.to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.dim(),
            offset,
            len: data.len() - offset,
            sha256: hex::encode(Sha256::digest(&data[offset..])),
        });
    }
    let header = serde_json::to_vec(&Header {
        version: SCHEMA_VERSION.to_string(),
        config: params.config.clone(),
        tensors,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&data);
    Ok(out)
}

fn truncated() -> Error {
    Error::SchemaMismatch {
        expected: "complete checkpoint".into(),
        found: "truncated file".into(),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::SchemaMismatch {
            expected: SCHEMA_VERSION.into(),
            found: "not a checkpoint".into(),
        });
    }
    let hlen = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let data_start = 12usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(truncated)?;
    let header: Header = serde_json::from_slice(&bytes[12..data_start])?;
    if header.version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            expected: SCHEMA_VERSION.into(),
            found: header.version,
        });
    }
    let data = &bytes[data_start..];
    let mut store = ParamStore::new();
    for t in &header.tensors {
        let end = t.offset.checked_add(t.len).filter(|&e| e <= data.len()).ok_or_else(truncated)?;
        if t.len != t.shape.0 * t.shape.1 * 8 {
            return Err(Error::SchemaMismatch {
                expected: format!("{} bytes for {} {:?}", t.shape.0 * t.shape.1 * 8, t.name, t.shape),
                found: format!("{} bytes", t.len),
            });
        }
        let raw = &data[t.offset..end];
        if hex::encode(Sha256::digest(raw)) != t.sha256 {
            return Err(Error::ChecksumMismatch(t.name.clone()));
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let arr = Array2::from_shape_vec(t.shape, values).expect("length checked above");
        store.insert(t.name.clone(), arr);
    }
    let params = ModelParams {
        config: header.config,
        store,
    };
    params.check_layout()?;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        let config = ModelConfig {
            dim: 4,
            fine_l: 2,
            pseudo_r: 2,
            depth: 1,
            align_depth: 1,
            head_hidden: vec![3],
            edge_hidden: 3,
            ..ModelConfig::default()
        };
        ModelParams::init(config, 5).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn missing_tensor_is_schema_mismatch() {
        let mut p = params();
        let mut store = ParamStore::new();
        for (name, t) in p.store.iter().filter(|(n, _)| *n != "head.out_b") {
            store.insert(name, t.clone());
        }
        p.store = store;
        let bytes = to_bytes(&p).unwrap();
        assert!(matches!(from_bytes(&bytes), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn flipped_byte_is_detected() {
        let bytes = to_bytes(&params()).unwrap();
        let mut bad = bytes.clone();
        let last = bad.len() - 3;
        bad[last] ^= 0x01;
        assert!(matches!(from_bytes(&bad), Err(Error::ChecksumMismatch(_))));
    }

    #[test]
    fn wrong_version_and_garbage() {
        assert!(matches!(from_bytes(b"nope"), Err(Error::SchemaMismatch { .. })));
        let bytes = to_bytes(&params()).unwrap();
        let hlen = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
        header["version"] = "veracity-checkpoint/0".into();
        let h = serde_json::to_vec(&header).unwrap();
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(h.len() as u64).to_le_bytes());
        out.extend_from_slice(&h);
        out.extend_from_slice(&bytes[12 + hlen..]);
        assert!(matches!(from_bytes(&out), Err(Error::SchemaMismatch { .. })));
    }
}
