//! Question answering: embed, retrieve top-k, render, generate.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::index::{SearchFilter, VectorIndex, DEFAULT_TOP_K};
use crate::llm::ChatModel;
use crate::prompt::{render_plain, render_with_context, MAX_CONTEXTS, TEMPLATE_VERSION};
use crate::types::{Answer, DocumentChunk, GenerationParams, SearchHit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub k: usize,
    pub filter: SearchFilter,
    pub use_rag: bool,
    pub template_version: String,
    /// Upper bound on the rendered prompt, in chars. Lowest-ranked contexts
    /// are dropped whole until the prompt fits.
    pub max_prompt_chars: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            k: DEFAULT_TOP_K,
            filter: SearchFilter::default(),
            use_rag: true,
            template_version: TEMPLATE_VERSION.into(),
            max_prompt_chars: Some(12_000),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_CONTEXTS {
            return Err(Error::InvalidConfig(format!(
                "k must be between 1 and {MAX_CONTEXTS}, got {}",
                self.k
            )));
        }
        self.filter.validate()
    }

    pub fn setting_label(&self) -> &'static str {
        if self.use_rag {
            "rag"
        } else {
            "no rag"
        }
    }
}

/// An answer plus the text of the chunks it was conditioned on, in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub answer: Answer,
    pub contexts: Vec<DocumentChunk>,
}

/// Anything that answers questions; the evaluation runner is written against this.
pub trait Responder: Send + Sync {
    fn respond(&self, question: &str) -> Result<Response>;

    fn model_id(&self) -> &str;

    fn setting(&self) -> &str;

    /// False for runs that answer without retrieval; their context metrics are null.
    fn uses_retrieval(&self) -> bool;
}

pub struct RagEngine {
    index: Arc<VectorIndex>,
    embedder: Arc<dyn Embedder>,
    llm: Arc<dyn ChatModel>,
    generation: GenerationParams,
}

impl RagEngine {
    pub fn new(
        index: Arc<VectorIndex>,
        embedder: Arc<dyn Embedder>,
        llm: Arc<dyn ChatModel>,
        generation: GenerationParams,
    ) -> Result<Self> {
        if embedder.dim() != index.dim() {
            return Err(Error::DimensionMismatch {
                expected: index.dim(),
                got: embedder.dim(),
            });
        }
        Ok(RagEngine {
            index,
            embedder,
            llm,
            generation,
        })
    }

    pub fn index(&self) -> &Arc<VectorIndex> {
        &self.index
    }

    pub fn model_id(&self) -> &str {
        self.llm.model_id()
    }

    pub fn respond(&self, question: &str, cfg: &EngineConfig) -> Result<Response> {
        if question.trim().is_empty() {
            return Err(Error::EmptyQuestion);
        }
        cfg.validate()?;

        let (prompt, hits, contexts) = if cfg.use_rag {
            if self.index.is_empty() {
                return Err(Error::IndexEmpty);
            }
            let query = self.embedder.embed_text(question)?;
            let mut hits = self.index.search(&query, cfg.k, &cfg.filter)?;
            let mut contexts = hits
                .iter()
                .map(|h| {
                    self.index
                        .get(&h.chunk_id)
                        .ok_or_else(|| Error::UnknownChunk(h.chunk_id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            loop {
                let texts: Vec<&str> = contexts.iter().map(|c| c.text.as_str()).collect();
                let prompt = render_with_context(question, &texts)?;
                let over = cfg
                    .max_prompt_chars
                    .is_some_and(|max| prompt.chars().count() > max);
                if !over || contexts.is_empty() {
                    break (prompt, hits, contexts);
                }
                tracing::debug!(dropped = %hits.last().map(|h| h.chunk_id.as_str()).unwrap_or(""), "prompt over budget");
                hits.pop();
                contexts.pop();
            }
        } else {
            (render_plain(question)?, Vec::<SearchHit>::new(), Vec::new())
        };

        let text = self.llm.complete(&prompt, &self.generation)?;
        Ok(Response {
            answer: Answer {
                text,
                sources: hits,
                query: question.to_string(),
                model_id: self.llm.model_id().to_string(),
                template_version: cfg.template_version.clone(),
                generation: self.generation,
            },
            contexts,
        })
    }

    pub fn answer(&self, question: &str, cfg: &EngineConfig) -> Result<Answer> {
        self.respond(question, cfg).map(|r| r.answer)
    }

    /// Answers every question, preserving order. Failures stay in place as
    /// `Err` entries; the batch itself never fails.
    pub fn answer_batch(&self, questions: &[String], cfg: &EngineConfig) -> Vec<Result<Answer>> {
        questions
            .par_iter()
            .map(|q| self.answer(q, cfg))
            .collect()
    }

    /// Binds a configuration, producing a [`Responder`].
    pub fn with_config(&self, cfg: EngineConfig) -> ConfiguredEngine<'_> {
        ConfiguredEngine { engine: self, cfg }
    }
}

pub struct ConfiguredEngine<'a> {
    engine: &'a RagEngine,
    cfg: EngineConfig,
}

impl Responder for ConfiguredEngine<'_> {
    fn respond(&self, question: &str) -> Result<Response> {
        self.engine.respond(question, &self.cfg)
    }

    fn model_id(&self) -> &str {
        self.engine.model_id()
    }

    fn setting(&self) -> &str {
        self.cfg.setting_label()
    }

    fn uses_retrieval(&self) -> bool {
        self.cfg.use_rag
    }
}

/// Serializable outcome of one batch entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchEntry {
    Answer(Answer),
    Error { code: String, message: String },
}

impl From<Result<Answer>> for BatchEntry {
    fn from(r: Result<Answer>) -> Self {
        match r {
            Ok(a) => BatchEntry::Answer(a),
            Err(e) => BatchEntry::Error {
                code: e.code().into(),
                message: e.to_string(),
            },
        }
    }
}
