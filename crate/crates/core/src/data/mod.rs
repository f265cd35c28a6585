//! Corpus ingestion, dataset splits, and checkpoint persistence.

pub mod checkpoint;
mod corpus;
mod split;
pub mod synthetic;

pub use corpus::{load_corpus, save_corpus, Corpus, Label, Language, NewsItem};
pub use split::{chronological_split, SplitMode, SplitSpec, Splits};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use synthetic::SyntheticSpec;
