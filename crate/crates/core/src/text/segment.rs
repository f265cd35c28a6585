use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};

const ABBREVIATIONS: &str = include_str!("../../assets/abbreviations.txt");

/// Sentences of one article with their byte spans in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceList {
    pub sentences: Vec<String>,
    pub spans: Vec<Range<usize>>,
}

impl SentenceList {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Wrap pre-split sentences. Spans index a virtual text joined by single
    /// spaces.
    pub fn from_sentences<S: AsRef<str>>(sentences: &[S]) -> Self {
        let mut spans = Vec::with_capacity(sentences.len());
        let mut pos = 0;
        for s in sentences {
            let len = s.as_ref().len();
            spans.push(pos..pos + len);
            pos += len + 1;
        }
        SentenceList {
            sentences: sentences.iter().map(|s| s.as_ref().to_string()).collect(),
            spans,
        }
    }
}

pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Result<SentenceList>;
}

/// Splits on terminal punctuation followed by whitespace or end of text.
/// Full-width CJK terminals close a sentence unconditionally.
#[derive(Clone, Debug)]
pub struct RuleSegmenter {
    abbreviations: HashSet<String>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        let abbreviations = ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        RuleSegmenter { abbreviations }
    }
}

fn is_ascii_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_cjk_terminal(c: char) -> bool {
    matches!(c, '。' | '！' | '？')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '」' | '』' | '）')
}

impl RuleSegmenter {
    pub fn with_abbreviations<I, S>(abbrevs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        RuleSegmenter {
            abbreviations: abbrevs.into_iter().map(|s| s.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn is_abbreviation(&self, token: &str) -> bool {
        self.abbreviations.contains(&token.to_lowercase())
    }

    /// The whitespace-delimited token that ends at byte `end` (exclusive).
    fn token_before<'a>(&self, text: &'a str, end: usize) -> &'a str {
        let start = text[..end]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        text[start..end].trim_start_matches(['"', '(', '\'', '“'])
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Result<SentenceList> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if start.is_none() {
                if c.is_whitespace() {
                    i += 1;
                    continue;
                }
                start = Some(pos);
            }
            let terminal_ascii = is_ascii_terminal(c);
            let terminal_cjk = is_cjk_terminal(c);
            if !terminal_ascii && !terminal_cjk {
                i += 1;
                continue;
            }
            // Absorb runs like "?!", "..." and closing quotes.
            let mut j = i + 1;
            while j < chars.len() && (is_ascii_terminal(chars[j].1) || is_cjk_terminal(chars[j].1) || is_closer(chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map(|(p, _)| *p).unwrap_or(text.len());
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            let split = if terminal_cjk {
                true
            } else if !at_boundary {
                false
            } else if c == '.' && j == i + 1 {
                let token = self.token_before(text, pos + 1);
                !self.is_abbreviation(token)
            } else {
                true
            };
            if split {
                spans.push(start.take().expect("sentence start")..end);
            }
            i = j;
        }
        if let Some(s) = start {
            let end = s + text[s..].trim_end().len();
            if end > s {
                spans.push(s..end);
            }
        }
        let sentences = spans.iter().map(|r| text[r.clone()].to_string()).collect();
        Ok(SentenceList { sentences, spans })
    }
}
