//! Building components from command-line choices and turning a manifest
//! into prepared splits.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use veracity_core::data::{chronological_split, load_corpus, Corpus};
use veracity_core::encoders::{
    AdapterConfig, CacheOnlyGenerator, CachedEncoder, HashEncoder, HttpEncoder, HttpGenerator, IntentCache,
    IntentGenerator, StubGenerator, TextEncoder,
};
use veracity_core::text::{CapitalizedRecognizer, DictionaryRecognizer, Recognizer, RuleSegmenter};
use veracity_core::{prepare_items, Components, Error, PreparedItem};

use crate::manifest::{EncoderSpec, RunManifest};

/// `None` for the offline implementation, `Some(model)` for an adapter.
pub fn parse_choice(choice: &str, offline: &str) -> Result<Option<String>> {
    if choice == offline {
        return Ok(None);
    }
    match choice.strip_prefix("adapter:") {
        Some(model) if !model.is_empty() => Ok(Some(model.to_string())),
        _ => bail!("expected `{offline}` or `adapter:<model>`, got {choice:?}"),
    }
}

fn adapter_config(model: &str, spec: &EncoderSpec) -> Result<AdapterConfig> {
    let Some(endpoint) = &spec.endpoint else {
        bail!("adapter {model:?} needs --endpoint");
    };
    let mut cfg = AdapterConfig::new(endpoint.clone(), model);
    cfg.api_key_env = spec.api_key_env.clone();
    cfg.max_in_flight = spec.max_in_flight.max(1);
    Ok(cfg)
}

/// Adapter embeddings are cached next to the intent cache.
pub fn embedding_cache_path(intent_cache: &Path, model: &str, dim: usize) -> PathBuf {
    let safe: String = model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    intent_cache
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("embeddings-{safe}-{dim}.jsonl"))
}

pub fn build_encoder(spec: &EncoderSpec, dim: usize, intent_cache: &Path) -> Result<Box<dyn TextEncoder>> {
    Ok(match parse_choice(&spec.encoder, "offline")? {
        None => Box::new(HashEncoder::new(dim)?),
        Some(model) => {
            let inner = HttpEncoder::new(adapter_config(&model, spec)?, dim)?;
            Box::new(CachedEncoder::open(inner, embedding_cache_path(intent_cache, &model, dim))?)
        }
    })
}

pub fn build_generator(choice: &str, spec: &EncoderSpec) -> Result<Box<dyn IntentGenerator>> {
    Ok(match parse_choice(choice, "stub")? {
        None => Box::new(StubGenerator::default()),
        Some(model) => Box::new(HttpGenerator::new(adapter_config(&model, spec)?)?),
    })
}

/// Capitalized-span recognizer, or exact lookup against a term list (one
/// term per line) when a dictionary is given.
pub fn build_recognizer(dict: Option<&Path>) -> Result<Box<dyn Recognizer>> {
    Ok(match dict {
        None => Box::new(CapitalizedRecognizer),
        Some(path) => {
            let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Box::new(DictionaryRecognizer::new(
                raw.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from),
            ))
        }
    })
}

pub struct PreparedSplits {
    pub train: Vec<PreparedItem>,
    pub val: Vec<PreparedItem>,
    pub test: Vec<PreparedItem>,
}

/// Loaded components for a manifest; intents come from the cache only.
pub struct Runtime {
    pub corpus: Corpus,
    segmenter: RuleSegmenter,
    recognizer: Box<dyn Recognizer>,
    encoder: Box<dyn TextEncoder>,
    cache: IntentCache,
    manifest: RunManifest,
}

impl Runtime {
    pub fn new(manifest: &RunManifest) -> Result<Self> {
        let corpus = load_corpus(&manifest.corpus.path)?;
        let cache_path = &manifest.intent_cache.path;
        let cache = IntentCache::open_read_only(cache_path)?;
        let missing = cache.missing(&corpus.items, &manifest.prompts.perspectives);
        if missing > 0 {
            return Err(Error::MissingCache { missing }.into());
        }
        Ok(Runtime {
            corpus,
            segmenter: RuleSegmenter::default(),
            recognizer: build_recognizer(manifest.entity_dict.as_ref().map(|d| d.path.as_path()))?,
            encoder: build_encoder(&manifest.encoder, manifest.config.model.dim, cache_path)?,
            cache,
            manifest: manifest.clone(),
        })
    }

    fn components(&self) -> Components<'_> {
        Components {
            segmenter: &self.segmenter,
            recognizer: self.recognizer.as_ref(),
            encoder: self.encoder.as_ref(),
            generator: &CacheOnlyGenerator,
            cache: &self.cache,
            prompts: &self.manifest.prompts.perspectives,
        }
    }

    pub fn prepare(&self, corpus: &Corpus) -> Result<Vec<PreparedItem>> {
        Ok(prepare_items(&corpus.items, &self.components(), &self.manifest.config.model)?)
    }

    pub fn splits(&self) -> Result<PreparedSplits> {
        let s = chronological_split(&self.corpus, &self.manifest.split)?;
        log::info!(
            "split {} items into {}/{}/{}",
            self.corpus.len(),
            s.train.len(),
            s.val.len(),
            s.test.len()
        );
        Ok(PreparedSplits {
            train: self.prepare(&s.train)?,
            val: self.prepare(&s.val)?,
            test: self.prepare(&s.test)?,
        })
    }
}
