//! Sentence-encoder interface.
//!
//! Two implementations: [`RemoteEmbedder`] calls an external encoder service
//! over HTTP, [`DeterministicEmbedder`] is a hashed bag-of-words encoder used
//! for offline runs and tests.

mod deterministic;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use deterministic::{fnv1a64, tokenize, DeterministicEmbedder};
pub use remote::{EmbedRequest, EmbedResponse, RemoteEmbedder};

use crate::error::{Error, Result};
use crate::http::RetryPolicy;
use crate::types::EmbeddingVector;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn model_name(&self) -> &str;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;

    /// Embeds `texts` in order. Fails as a whole if any element fails.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Remote,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub dim: usize,
    pub timeout_ms: u64,
    /// Texts per upstream request.
    pub max_batch: usize,
    /// Largest accepted `embed_batch` call.
    pub max_corpus: usize,
    /// Longest accepted text, in chars. Longer input is an error, never truncated.
    pub max_text_chars: usize,
    pub max_concurrent: usize,
    pub retry: RetryPolicy,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: EmbedderKind::Remote,
            endpoint_url: None,
            model_name: "mpnet-base".into(),
            dim: 768,
            timeout_ms: 30_000,
            max_batch: 64,
            max_corpus: 1_000_000,
            max_text_chars: 20_000,
            max_concurrent: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl EmbedderConfig {
    pub fn deterministic(dim: usize) -> Self {
        EmbedderConfig {
            kind: EmbedderKind::Deterministic,
            model_name: "hashed-bow".into(),
            dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("embedder: {m}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.max_batch == 0 || self.max_corpus == 0 {
            return bad("max_batch and max_corpus must be positive");
        }
        if self.kind == EmbedderKind::Remote && self.endpoint_url.is_none() {
            return bad("remote embedder needs endpoint_url");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        Ok(match self.kind {
            EmbedderKind::Deterministic => Arc::new(DeterministicEmbedder::new(self.dim)?),
            EmbedderKind::Remote => Arc::new(RemoteEmbedder::new(self.clone())?),
        })
    }
}
