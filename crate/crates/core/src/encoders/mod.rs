//! External-model seams: text encoders, intent generators, and the
//! persistent intent cache.

mod adapter;
mod cache;
mod generator;
mod text_encoder;

pub use adapter::{AdapterClient, AdapterConfig, DEFAULT_API_KEY_ENV};
pub use cache::{analyze_intent, populate_cache, IntentCache, IntentRecord};
pub use generator::{
    CacheOnlyGenerator, HttpGenerator, IntentGenerator, Perspective, PromptSet, StubGenerator, TEXT_PLACEHOLDER,
};
pub use text_encoder::{deterministic_encode, CachedEncoder, HashEncoder, HttpEncoder, TextEncoder};
