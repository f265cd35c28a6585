use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth veracity label. Serialized as `0` (real) or `1` (fake).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Real => 0.0,
            Label::Fake => 1.0,
        }
    }

    pub fn from_prob(prob: f64) -> Self {
        if prob >= 0.5 {
            Label::Fake
        } else {
            Label::Real
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Real),
            1 => Ok(Label::Fake),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
}

/// One labeled article.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    #[serde(default)]
    pub language: Language,
}

impl NewsItem {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        NewsItem {
            id: id.into(),
            text: text.into(),
            label,
            timestamp: None,
            language: Language::En,
        }
    }

    pub fn with_timestamp(mut self, ts: i64) -> Self {
        self.timestamp = Some(ts);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidItem {
                id: self.id.clone(),
                reason: "empty id".into(),
            });
        }
        if self.text.trim().is_empty() {
            return Err(Error::InvalidItem {
                id: self.id.clone(),
                reason: "empty text".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub items: Vec<NewsItem>,
}

impl Corpus {
    /// Build a corpus, rejecting duplicate ids and empty texts.
    pub fn new(name: impl Into<String>, items: Vec<NewsItem>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            item.validate()?;
            if !seen.insert(item.id.as_str()) {
                return Err(Error::DuplicateId(item.id.clone()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&NewsItem> {
        self.items.iter().find(|it| it.id == id)
    }

    pub fn has_both_labels(&self) -> bool {
        let fake = self.items.iter().any(|it| it.label == Label::Fake);
        let real = self.items.iter().any(|it| it.label == Label::Real);
        fake && real
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|it| it.label == label).count()
    }
}

/// Read a line-delimited corpus file. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: NewsItem = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        item.validate().map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(name, items)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in &corpus.items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_valid_lines_in_order() {
        let f = write(&[
            r#"{"id":"a","text":"One.","label":0,"timestamp":3,"language":"en"}"#,
            r#"{"id":"b","text":"Two.","label":1,"language":"zh"}"#,
            r#"{"id":"c","text":"Three.","label":1,"timestamp":1,"language":"en"}"#,
        ]);
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.len(), 3);
        let ids: Vec<_> = c.items.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(c.items[1].timestamp, None);
        assert_eq!(c.items[1].language, Language::Zh);
        assert_eq!(c.items[2].label, Label::Fake);
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write(&[
            r#"{"id":"a","text":"One.","label":0,"language":"en"}"#,
            r#"{"id":"a","text":"Two.","label":1,"language":"en"}"#,
        ]);
        match load_corpus(f.path()) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write(&[
            r#"{"id":"a","text":"One.","label":0,"language":"en"}"#,
            r#"{"id":"b","text":"Two.","label":2,"language":"en"}"#,
        ]);
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
        let f = write(&[r#"{"id":"a","text":"   ","label":0,"language":"en"}"#]);
        assert!(matches!(load_corpus(f.path()), Err(Error::Parse { line: 1, .. })));
        let f = write(&["not json"]);
        assert!(matches!(load_corpus(f.path()), Err(Error::Parse { line: 1, .. })));
    }
}
