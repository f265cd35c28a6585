use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adapter::{AdapterClient, AdapterConfig};
use crate::error::{Error, Result};

/// Text-to-vector model. Implementations must be deterministic for a fixed
/// instance and input, and return finite values.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    /// One row per input text.
    fn encode(&self, texts: &[&str]) -> Result<Array2<f64>>;
}

/// Offline encoder: each text maps to a unit-norm Gaussian direction seeded
/// by the SHA-256 of its UTF-8 bytes. Stable across processes and
/// platforms.
#[derive(Clone, Debug)]
pub struct HashEncoder {
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("encoder dimension must be at least 1".into()));
        }
        Ok(HashEncoder { dim })
    }
}

impl TextEncoder for HashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, texts: &[&str]) -> Result<Array2<f64>> {
        Ok(deterministic_encode(texts, self.dim))
    }
}

pub fn deterministic_encode(texts: &[&str], dim: usize) -> Array2<f64> {
    assert!(dim >= 1, "dim must be at least 1");
    let mut out = Array2::<f64>::zeros((texts.len(), dim));
    for (mut row, text) in out.rows_mut().into_iter().zip(texts) {
        let seed: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        loop {
            for x in row.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
                break;
            }
        }
    }
    out
}

/// Embedding endpoint speaking the common `POST {endpoint}/embeddings`
/// protocol (`{"model", "input"}` in, `{"data": [{"embedding"}]}` out).
pub struct HttpEncoder {
    client: AdapterClient,
    dim: usize,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEncoder {
    pub fn new(config: AdapterConfig, dim: usize) -> Result<Self> {
        Ok(HttpEncoder {
            client: AdapterClient::new(config)?,
            dim,
        })
    }
}

impl TextEncoder for HttpEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, texts: &[&str]) -> Result<Array2<f64>> {
        if texts.is_empty() {
            return Ok(Array2::zeros((0, self.dim)));
        }
        let body = EmbeddingRequest {
            model: &self.client.config().model,
            input: texts,
        };
        let resp: EmbeddingResponse = self
            .client
            .post_json("embeddings", &body)
            .map_err(|e| Error::Encoder(e.to_string()))?;
        if resp.data.len() != texts.len() {
            return Err(Error::Encoder(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                resp.data.len()
            )));
        }
        let mut out = Array2::zeros((texts.len(), self.dim));
        for (mut row, d) in out.rows_mut().into_iter().zip(resp.data) {
            if d.embedding.len() != self.dim || d.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::Encoder(format!(
                    "embedding of length {} (expected {}) or non-finite",
                    d.embedding.len(),
                    self.dim
                )));
            }
            row.assign(&ndarray::ArrayView1::from(&d.embedding));
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    text_digest: String,
    embedding: Vec<f64>,
}

/// Wraps an encoder with a persistent, append-only embedding cache keyed by
/// text digest. Useful in front of remote encoders.
pub struct CachedEncoder<E> {
    inner: E,
    map: RwLock<HashMap<String, Vec<f64>>>,
    file: Mutex<Option<(PathBuf, File)>>,
}

impl<E: TextEncoder> CachedEncoder<E> {
    pub fn in_memory(inner: E) -> Self {
        CachedEncoder {
            inner,
            map: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
        }
    }

    pub fn open(inner: E, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut map = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if rec.embedding.len() == inner.dim() {
                    map.insert(rec.text_digest, rec.embedding);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(CachedEncoder {
            inner,
            map: RwLock::new(map),
            file: Mutex::new(Some((path, file))),
        })
    }

    pub fn cached(&self) -> usize {
        self.map.read().len()
    }
}

fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl<E: TextEncoder> TextEncoder for CachedEncoder<E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn encode(&self, texts: &[&str]) -> Result<Array2<f64>> {
        let digests: Vec<String> = texts.iter().map(|t| text_digest(t)).collect();
        let missing: Vec<usize> = {
            let map = self.map.read();
            let mut seen = std::collections::HashSet::new();
            (0..texts.len())
                .filter(|&i| !map.contains_key(&digests[i]) && seen.insert(&digests[i]))
                .collect()
        };
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.encode(&batch)?;
            let mut file = self.file.lock();
            let mut map = self.map.write();
            for (row, &i) in fresh.rows().into_iter().zip(&missing) {
                let rec = EmbeddingRecord {
                    text_digest: digests[i].clone(),
                    embedding: row.to_vec(),
                };
                if let Some((path, f)) = file.as_mut() {
                    let line = serde_json::to_string(&rec)?;
                    writeln!(f, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
                }
                map.insert(rec.text_digest, rec.embedding);
            }
        }
        let map = self.map.read();
        let mut out = Array2::zeros((texts.len(), self.dim()));
        for (mut row, d) in out.rows_mut().into_iter().zip(&digests) {
            row.assign(&ndarray::ArrayView1::from(&map[d]));
        }
        Ok(out)
    }
}
