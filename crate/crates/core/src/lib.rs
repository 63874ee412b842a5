//! Retrieval-augmented question answering over broadcast-news transcripts.
//!
//! Pipeline: [`ingest`] transcripts into documents, [`chunker`] splits them,
//! an [`embed::Embedder`] encodes chunks into the [`index::VectorIndex`], and
//! [`engine::RagEngine`] answers questions with a chat model. [`qa`] builds
//! instruction datasets and [`eval`] scores answers.

pub mod chunker;
pub mod embed;
pub mod engine;
pub mod error;
pub mod eval;
mod http;
pub mod index;
pub mod ingest;
pub mod jsonl;
pub mod llm;
pub mod prompt;
pub mod qa;
pub mod types;

pub use error::{Error, ErrorCategory, Result};
pub use http::RetryPolicy;
pub use types::*;
