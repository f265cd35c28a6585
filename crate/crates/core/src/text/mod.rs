//! Sentence segmentation and entity extraction.

mod entities;
mod segment;

pub use entities::{
    extract_entities, normalize, CapitalizedRecognizer, DictionaryRecognizer, EntityTable, Mention, Recognizer,
    DEFAULT_MAX_ENTITIES,
};
pub use segment::{RuleSegmenter, Segmenter, SentenceList};
