use std::collections::{BTreeSet, HashMap};

use super::segment::SentenceList;
use crate::error::{Error, Result};

/// Default cap on distinct entities per article.
pub const DEFAULT_MAX_ENTITIES: usize = 32;

/// One recognized entity mention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mention {
    pub surface: String,
    pub sentence: usize,
}

pub trait Recognizer: Send + Sync {
    fn recognize(&self, sentences: &SentenceList) -> Vec<Mention>;
}

/// Distinct entities of one article and the sentences that mention them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityTable {
    /// Surface form of each entity's first mention.
    pub entities: Vec<String>,
    /// `(sentence index, entity index)` pairs.
    pub incidence: BTreeSet<(usize, usize)>,
}

impl EntityTable {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

pub fn normalize(surface: &str) -> String {
    surface.to_lowercase()
}

/// Deduplicate mentions by case-folded surface and keep at most
/// `max_entities`, preferring frequent entities and, among equals, earlier
/// first mentions. Kept entities stay in first-mention order.
pub fn extract_entities(
    sentences: &SentenceList,
    recognizer: &dyn Recognizer,
    max_entities: usize,
) -> Result<EntityTable> {
    struct Stat {
        surface: String,
        first: usize,
        count: usize,
    }
    let mentions = recognizer.recognize(sentences);
    let mut stats: Vec<Stat> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(mentions.len());
    for m in mentions {
        if m.sentence >= sentences.len() {
            return Err(Error::IndexOutOfRange {
                what: "sentence",
                index: m.sentence,
                len: sentences.len(),
            });
        }
        if m.surface.trim().is_empty() {
            continue;
        }
        let key = normalize(&m.surface);
        let slot = *index.entry(key).or_insert_with(|| {
            stats.push(Stat {
                surface: m.surface.clone(),
                first: stats.len(),
                count: 0,
            });
            stats.len() - 1
        });
        stats[slot].count += 1;
        pairs.push((m.sentence, slot));
    }

    let mut ranked: Vec<usize> = (0..stats.len()).collect();
    ranked.sort_by(|&a, &b| stats[b].count.cmp(&stats[a].count).then(stats[a].first.cmp(&stats[b].first)));
    ranked.truncate(max_entities);
    ranked.sort_unstable();

    let mut remap = vec![None; stats.len()];
    for (new, &old) in ranked.iter().enumerate() {
        remap[old] = Some(new);
    }
    let entities = ranked.iter().map(|&i| stats[i].surface.clone()).collect();
    let incidence = pairs
        .into_iter()
        .filter_map(|(s, e)| remap[e].map(|j| (s, j)))
        .collect();
    Ok(EntityTable { entities, incidence })
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "it", "its", "he", "she", "they", "we", "i", "you",
    "his", "her", "their", "our", "my", "your", "in", "on", "at", "of", "for", "to", "from", "by", "with",
    "and", "but", "or", "if", "when", "while", "after", "before", "as", "so", "yet", "there", "here", "what",
    "who", "why", "how", "where", "some", "many", "most", "all", "no", "not", "yes", "also", "then", "however",
];

/// Spans of consecutive capitalized tokens, for Latin-script text.
///
/// A run breaks at any token carrying trailing punctuation. Leading
/// function words ("The", "In", ...) are dropped from a run.
#[derive(Clone, Debug, Default)]
pub struct CapitalizedRecognizer;

impl CapitalizedRecognizer {
    fn mentions_in(sentence: &str) -> Vec<String> {
        // (start, end, breaks_after)
        let mut tokens: Vec<(usize, usize, bool)> = Vec::new();
        let mut cursor = 0;
        for raw in sentence.split_whitespace() {
            let raw_start = cursor + sentence[cursor..].find(raw).expect("token present");
            cursor = raw_start + raw.len();
            let lead = raw.len() - raw.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
            let core = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if core.is_empty() {
                tokens.push((raw_start, raw_start, true));
                continue;
            }
            let start = raw_start + lead;
            let end = start + core.len();
            let trailing = end < raw_start + raw.len();
            tokens.push((start, end, trailing));
        }

        let mut out = Vec::new();
        let mut run: Vec<(usize, usize)> = Vec::new();
        let flush = |run: &mut Vec<(usize, usize)>, out: &mut Vec<String>| {
            let mut k = 0;
            while k < run.len() && STOPWORDS.contains(&sentence[run[k].0..run[k].1].to_lowercase().as_str()) {
                k += 1;
            }
            if k < run.len() {
                out.push(sentence[run[k].0..run[run.len() - 1].1].to_string());
            }
            run.clear();
        };
        for &(s, e, breaks) in &tokens {
            let capitalized = sentence[s..e].chars().next().is_some_and(char::is_uppercase);
            if capitalized {
                run.push((s, e));
                if breaks {
                    flush(&mut run, &mut out);
                }
            } else {
                flush(&mut run, &mut out);
            }
        }
        flush(&mut run, &mut out);
        out
    }
}

impl Recognizer for CapitalizedRecognizer {
    fn recognize(&self, sentences: &SentenceList) -> Vec<Mention> {
        sentences
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                Self::mentions_in(s)
                    .into_iter()
                    .map(move |surface| Mention { surface, sentence: i })
            })
            .collect()
    }
}

/// Exact-substring lookup against a fixed term list; the default for
/// Chinese text, where capitalization carries no signal.
#[derive(Clone, Debug, Default)]
pub struct DictionaryRecognizer {
    terms: Vec<String>,
}

impl DictionaryRecognizer {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut terms: Vec<String> = terms.into_iter().map(Into::into).filter(|t: &String| !t.is_empty()).collect();
        // Longest first so overlapping shorter terms are not double counted.
        terms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        terms.dedup();
        DictionaryRecognizer { terms }
    }
}

impl Recognizer for DictionaryRecognizer {
    fn recognize(&self, sentences: &SentenceList) -> Vec<Mention> {
        let mut out = Vec::new();
        for (i, s) in sentences.sentences.iter().enumerate() {
            let mut taken: Vec<std::ops::Range<usize>> = Vec::new();
            let mut found: Vec<(usize, String)> = Vec::new();
            for term in &self.terms {
                for (pos, _) in s.match_indices(term.as_str()) {
                    let r = pos..pos + term.len();
                    if taken.iter().any(|t| t.start < r.end && r.start < t.end) {
                        continue;
                    }
                    taken.push(r);
                    found.push((pos, term.clone()));
                }
            }
            found.sort();
            out.extend(found.into_iter().map(|(_, surface)| Mention { surface, sentence: i }));
        }
        out
    }
}
