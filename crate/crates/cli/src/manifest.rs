use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use veracity_core::data::SplitSpec;
use veracity_core::encoders::PromptSet;
use veracity_core::TrainConfig;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let path = std::fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
        Ok(FileDigest {
            sha256: sha256_file(&path)?,
            path,
        })
    }

    /// Fails if the file no longer matches the recorded digest.
    pub fn verify(&self) -> Result<()> {
        let now = sha256_file(&self.path)?;
        if now != self.sha256 {
            bail!(
                "{} changed since the manifest was written (sha256 {} != {})",
                self.path.display(),
                now,
                self.sha256
            );
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Where the text encoder comes from and how to reach it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    /// `offline` or `adapter:<model>`.
    pub encoder: String,
    pub endpoint: Option<String>,
    pub api_key_env: String,
    pub max_in_flight: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub fine_l: Vec<usize>,
    pub pseudo_r: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Train,
    Ablate,
    Sweep(SweepGrid),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Everything needed to repeat a run. Written before any training starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: RunKind,
    pub code_version: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub split: SplitSpec,
    pub encoder: EncoderSpec,
    pub corpus: FileDigest,
    pub prompts: PromptSet,
    pub intent_cache: FileDigest,
    pub entity_dict: Option<FileDigest>,
    pub outputs: Outputs,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.outputs.dir.join(Self::FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
    }

    /// Accepts either the manifest file or the run directory holding it.
    pub fn locate(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::load(&path.join(Self::FILE))
        } else {
            Self::load(path)
        }
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.outputs.dir.join(CHECKPOINT)
    }
}

pub const CHECKPOINT: &str = "checkpoint.vrck";
pub const METRICS: &str = "metrics.json";
pub const HISTORY: &str = "history.jsonl";
pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TABLE: &str = "ablation.txt";
pub const SWEEP: &str = "sweep.jsonl";
