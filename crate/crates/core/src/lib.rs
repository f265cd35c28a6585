//! Intent-semantic joint graph model for fake news detection.
//!
//! Each article becomes two graphs: a semantic graph of sentences and named
//! entities, and an intent graph of generator-derived perspective analyses
//! refined by learnable fine-grained nodes. Both are updated by learned-weight
//! local passing plus a super-root global step, then aligned through a small
//! set of pseudo nodes whose pooled state feeds a binary classifier.
//!
//! External models (sentence encoder, intent generator) sit behind traits
//! with deterministic offline implementations, so everything here runs and
//! tests without network access.

pub mod alignment;
pub mod autodiff;
pub mod data;
pub mod dump;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod head;
pub mod intent_graph;
pub mod message_passing;
pub mod metrics;
pub mod model;
pub mod params;
pub mod semantic_graph;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use model::{
    forward, predict_item, prepare_item, prepare_items, Ablation, Components, ModelConfig, ModelParams,
    OfflineComponents, PreparedItem,
};
pub use training::{evaluate, run_ablation, train, TrainConfig};
