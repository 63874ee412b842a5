#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use newsrag::chunker::{self, ChunkPolicy};
use newsrag::embed::{DeterministicEmbedder, Embedder};
use newsrag::engine::RagEngine;
use newsrag::index::{IndexedChunk, VectorIndex};
use newsrag::ingest::{ingest_directory, IngestOptions};
use newsrag::llm::ChatModel;
use newsrag::{Document, GenerationParams, QAPair, Result};

pub const FIXTURE_DIM: usize = 512;
pub const NO_CONTEXT_REPLY: &str = "I have no reporting on that question.";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_policy() -> ChunkPolicy {
    ChunkPolicy::new(400, 80).unwrap()
}

pub fn fixture_documents() -> Vec<Document> {
    let report = ingest_directory(&fixtures().join("corpus"), &IngestOptions::default()).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    report.documents
}

pub fn fixture_evalset() -> Vec<QAPair> {
    newsrag::jsonl::read(&fixtures().join("evalset.jsonl")).unwrap()
}

pub fn build_index(docs: &[Document], embedder: &dyn Embedder) -> VectorIndex {
    let index = VectorIndex::new(embedder.dim()).unwrap();
    let mut items = Vec::new();
    for d in docs {
        for c in chunker::split(d, &fixture_policy()).unwrap() {
            let vector = embedder.embed_text(&c.text).unwrap();
            items.push(IndexedChunk { chunk: c, vector });
        }
    }
    index.upsert(items).unwrap();
    index
}

/// Replies with the first sentence of the top-ranked context, or a fixed
/// line when the prompt carries no context.
pub fn scripted_reply(prompt: &str) -> String {
    let Some(ctx) = prompt
        .lines()
        .find_map(|l| l.strip_prefix("Context [1]: "))
    else {
        return NO_CONTEXT_REPLY.to_string();
    };
    let bytes = ctx.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|n| *n == b' ') {
            return ctx[..=i].trim().to_string();
        }
    }
    ctx.trim().to_string()
}

pub struct ScriptedModel;

impl ChatModel for ScriptedModel {
    fn model_id(&self) -> &str {
        "scripted-stub"
    }

    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String> {
        Ok(scripted_reply(prompt))
    }
}

pub fn fixture_engine() -> (RagEngine, Arc<DeterministicEmbedder>) {
    let embedder = Arc::new(DeterministicEmbedder::new(FIXTURE_DIM).unwrap());
    let index = Arc::new(build_index(&fixture_documents(), embedder.as_ref()));
    let engine = RagEngine::new(
        index,
        embedder.clone(),
        Arc::new(ScriptedModel),
        GenerationParams::default(),
    )
    .unwrap();
    (engine, embedder)
}

/// Serves `router` on an ephemeral port from a background runtime.
pub fn serve(router: axum::Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}
