use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{IntentGenerator, Perspective};
use crate::data::NewsItem;
use crate::error::{Error, Result};

/// One line of the intent cache file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub news_id: String,
    pub perspective_index: usize,
    pub prompt_digest: String,
    pub analysis: String,
}

type Key = (String, usize, String);

/// Append-only store of generator outputs keyed by
/// `(news id, perspective index, prompt digest)`.
///
/// Writes are serialized through one file handle; later records for the
/// same key win on reload.
pub struct IntentCache {
    map: RwLock<HashMap<Key, String>>,
    file: Mutex<Option<(PathBuf, File)>>,
}

impl Default for IntentCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl IntentCache {
    pub fn in_memory() -> Self {
        IntentCache {
            map: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
        }
    }

    /// Open (creating if needed) a cache file and load its records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let map = RwLock::new(read_records(&path)?);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(IntentCache {
            map,
            file: Mutex::new(Some((path, file))),
        })
    }

    /// Load records without opening the file for writing.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self> {
        Ok(IntentCache {
            map: RwLock::new(read_records(path.as_ref())?),
            file: Mutex::new(None),
        })
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.read().is_empty()
    }

    pub fn get(&self, news_id: &str, perspective_index: usize, prompt_digest: &str) -> Option<String> {
        self.map
            .read()
            .get(&(news_id.to_string(), perspective_index, prompt_digest.to_string()))
            .cloned()
    }

    pub fn insert(&self, record: IntentRecord) -> Result<()> {
        let mut file = self.file.lock();
        if let Some((path, f)) = file.as_mut() {
            let line = serde_json::to_string(&record)?;
            writeln!(f, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
            f.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        self.map.write().insert(
            (record.news_id, record.perspective_index, record.prompt_digest),
            record.analysis,
        );
        Ok(())
    }

    /// Number of `(item, perspective)` analyses not yet cached.
    pub fn missing<'a>(&self, items: impl IntoIterator<Item = &'a NewsItem>, prompts: &[Perspective]) -> usize {
        let digests: Vec<String> = prompts.iter().map(Perspective::digest).collect();
        let map = self.map.read();
        items
            .into_iter()
            .map(|it| {
                digests
                    .iter()
                    .enumerate()
                    .filter(|(i, d)| !map.contains_key(&(it.id.clone(), *i, (*d).clone())))
                    .count()
            })
            .sum()
    }
}

fn read_records(path: &Path) -> Result<HashMap<Key, String>> {
    let mut map = HashMap::new();
    if !path.exists() {
        return Ok(map);
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IntentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        map.insert((rec.news_id, rec.perspective_index, rec.prompt_digest), rec.analysis);
    }
    Ok(map)
}

/// Analyses for `item` under each prompt, in prompt order.
///
/// Cached entries are returned as stored; the generator is called once with
/// only the missing perspectives and its outputs are persisted.
pub fn analyze_intent(
    item: &NewsItem,
    prompts: &[Perspective],
    generator: &dyn IntentGenerator,
    cache: &IntentCache,
) -> Result<Vec<String>> {
    if prompts.is_empty() {
        return Err(Error::InvalidConfig("at least one prompt is required".into()));
    }
    let digests: Vec<String> = prompts.iter().map(Perspective::digest).collect();
    let mut out: Vec<Option<String>> = digests
        .iter()
        .enumerate()
        .map(|(i, d)| cache.get(&item.id, i, d))
        .collect();
    let missing: Vec<usize> = (0..prompts.len()).filter(|&i| out[i].is_none()).collect();
    if !missing.is_empty() {
        let subset: Vec<Perspective> = missing.iter().map(|&i| prompts[i].clone()).collect();
        let fresh = generator.analyze(&item.text, &subset)?;
        if fresh.len() != subset.len() || fresh.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::GeneratorUnavailable(format!(
                "generator returned {} analyses for {} prompts (or an empty analysis)",
                fresh.len(),
                subset.len()
            )));
        }
        for (&i, analysis) in missing.iter().zip(fresh) {
            cache.insert(IntentRecord {
                news_id: item.id.clone(),
                perspective_index: i,
                prompt_digest: digests[i].clone(),
                analysis: analysis.clone(),
            })?;
            out[i] = Some(analysis);
        }
    }
    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

/// Run [`analyze_intent`] over every item in parallel, continuing past
/// failures so that successful analyses are still persisted. Returns the
/// number of records added.
pub fn populate_cache(
    items: &[NewsItem],
    prompts: &[Perspective],
    generator: &dyn IntentGenerator,
    cache: &IntentCache,
) -> Result<usize> {
    let before = cache.len();
    let failures: Vec<Error> = items
        .par_iter()
        .filter_map(|it| analyze_intent(it, prompts, generator, cache).err())
        .collect();
    if let Some(first) = failures.into_iter().next() {
        let missing = cache.missing(items, prompts);
        return Err(Error::GeneratorUnavailable(format!(
            "{missing} analyses still missing after generation; first failure: {first}"
        )));
    }
    Ok(cache.len() - before)
}
