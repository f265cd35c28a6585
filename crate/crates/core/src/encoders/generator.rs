use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adapter::{AdapterClient, AdapterConfig};
use crate::error::{Error, Result};
use crate::text::{RuleSegmenter, Segmenter};

const PROMPTS_FOUR: &str = include_str!("../../assets/prompts_intent4.json");
const PROMPTS_NINE: &str = include_str!("../../assets/prompts_intent9.json");

/// Placeholder replaced by the article text when a template is rendered.
pub const TEXT_PLACEHOLDER: &str = "{text}";

/// One analytical perspective and its prompt template.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perspective {
    pub name: String,
    pub template: String,
}

impl Perspective {
    pub fn render(&self, text: &str) -> String {
        self.template.replace(TEXT_PLACEHOLDER, text)
    }

    /// Hex SHA-256 over name and template. Editing either invalidates the
    /// cached analyses for this perspective.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0u8]);
        h.update(self.template.as_bytes());
        hex::encode(h.finalize())
    }
}

/// Ordered perspectives plus the dependency chain among them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub perspectives: Vec<Perspective>,
    /// Perspective names in chain order; defaults to file order.
    #[serde(default)]
    pub chain: Vec<String>,
}

impl PromptSet {
    /// Belief, plan, desire, outcome; chained belief → desire → plan → outcome.
    pub fn four_perspectives() -> Self {
        serde_json::from_str(PROMPTS_FOUR).expect("bundled prompt set parses")
    }

    pub fn nine_perspectives() -> Self {
        serde_json::from_str(PROMPTS_NINE).expect("bundled prompt set parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: PromptSet = serde_json::from_str(&raw)?;
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.perspectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perspectives.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.perspectives.is_empty() {
            return Err(Error::InvalidConfig("prompt set has no perspectives".into()));
        }
        for p in &self.perspectives {
            if !p.template.contains(TEXT_PLACEHOLDER) {
                return Err(Error::InvalidConfig(format!(
                    "template for {:?} lacks the {TEXT_PLACEHOLDER} placeholder",
                    p.name
                )));
            }
        }
        self.chain_order().map(|_| ())
    }

    /// Chain as a permutation of perspective indices.
    pub fn chain_order(&self) -> Result<Vec<usize>> {
        if self.chain.is_empty() {
            return Ok((0..self.perspectives.len()).collect());
        }
        let order = self
            .chain
            .iter()
            .map(|name| {
                self.perspectives
                    .iter()
                    .position(|p| &p.name == name)
                    .ok_or_else(|| Error::InvalidOrder(format!("unknown perspective {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        crate::intent_graph::validate_order(&order, self.perspectives.len())?;
        Ok(order)
    }
}

/// Frozen generative analyzer producing one analysis per perspective.
pub trait IntentGenerator: Send + Sync {
    /// Must return exactly `prompts.len()` non-empty strings, index-aligned.
    fn analyze(&self, text: &str, prompts: &[Perspective]) -> Result<Vec<String>>;
}

/// Offline generator: `"<perspective>: <leading sentence of text>"`.
#[derive(Clone, Debug, Default)]
pub struct StubGenerator {
    segmenter: RuleSegmenter,
}

impl IntentGenerator for StubGenerator {
    fn analyze(&self, text: &str, prompts: &[Perspective]) -> Result<Vec<String>> {
        let lead = self.segmenter.segment(text)?.sentences.swap_remove(0);
        Ok(prompts.iter().map(|p| format!("{}: {lead}", p.name)).collect())
    }
}

/// Remote chat-completion generator (`POST {endpoint}/chat/completions`).
pub struct HttpGenerator {
    client: AdapterClient,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

impl HttpGenerator {
    pub fn new(config: AdapterConfig) -> Result<Self> {
        Ok(HttpGenerator {
            client: AdapterClient::new(config)?,
        })
    }
}

impl IntentGenerator for HttpGenerator {
    fn analyze(&self, text: &str, prompts: &[Perspective]) -> Result<Vec<String>> {
        prompts
            .iter()
            .map(|p| {
                let req = ChatRequest {
                    model: &self.client.config().model,
                    messages: vec![ChatMessage {
                        role: "user".into(),
                        content: p.render(text),
                    }],
                    temperature: 0.0,
                };
                let resp: ChatResponse = self.client.post_json("chat/completions", &req)?;
                let content = resp
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content.trim().to_string())
                    .unwrap_or_default();
                if content.is_empty() {
                    return Err(Error::GeneratorUnavailable(format!("empty analysis for perspective {:?}", p.name)));
                }
                Ok(content)
            })
            .collect()
    }
}

/// Serves nothing; every request is a cache miss. Used where analyses must
/// already be cached (training, evaluation).
#[derive(Clone, Copy, Debug, Default)]
pub struct CacheOnlyGenerator;

impl IntentGenerator for CacheOnlyGenerator {
    fn analyze(&self, _text: &str, prompts: &[Perspective]) -> Result<Vec<String>> {
        Err(Error::MissingCache { missing: prompts.len() })
    }
}
