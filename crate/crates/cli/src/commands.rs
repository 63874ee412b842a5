use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use newsrag::chunker::{self, ChunkPolicy};
use newsrag::engine::{EngineConfig, RagEngine};
use newsrag::eval::{run_eval, EvalConfig, EvalReport, JudgeKind};
use newsrag::index::{IndexedChunk, VectorIndex};
use newsrag::ingest::{ingest_directory, IngestOptions};
use newsrag::llm::{ChatModel, LlmClientConfig, RemoteChatModel};
use newsrag::qa::generate_corpus;
use newsrag::{jsonl, Document, DocumentChunk, Error, QAPair, Result};

use crate::config::ServiceConfig;
use crate::server::{self, QueryResponse};
use crate::{
    AskArgs, ChunkArgs, Command, EvaluateArgs, ExtractQaArgs, IndexCommand, IngestArgs,
    ServeArgs, SettingChoice,
};

pub fn dispatch(cmd: Command, cfg: ServiceConfig) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Chunk(a) => chunk(a, &cfg),
        Command::Index(IndexCommand::Build { chunks, out }) => {
            index_build(&chunks, out.as_deref().unwrap_or(&cfg.snapshot_path), &cfg)
        }
        Command::Index(IndexCommand::Export { out, snapshot }) => {
            let snapshot = snapshot.unwrap_or_else(|| cfg.snapshot_path.clone());
            let n = VectorIndex::load_snapshot(&snapshot)?.export_jsonl(&out)?;
            print_json(&serde_json::json!({ "exported": n, "out": out }))
        }
        Command::Index(IndexCommand::Import { input, out }) => {
            let out = out.unwrap_or_else(|| cfg.snapshot_path.clone());
            let index = VectorIndex::import_jsonl(&input, None)?;
            index.save_snapshot(&out)?;
            print_json(&serde_json::json!({ "imported": index.len(), "dim": index.dim(), "out": out }))
        }
        Command::Ask(a) => ask(a, &cfg),
        Command::ExtractQa(a) => extract_qa(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Serve(ServeArgs { bind, snapshot }) => {
            let mut cfg = cfg;
            if let Some(b) = bind {
                cfg.bind_addr = b;
            }
            if let Some(s) = snapshot {
                cfg.snapshot_path = s;
            }
            cfg.validate()?;
            server::serve(cfg)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::json("stdout", e))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{s}").map_err(|e| Error::io("stdout", e))
}

/// Documents from a JSONL file, or parsed from a transcript directory.
fn load_documents(input: &Path) -> Result<Vec<Document>> {
    if input.is_dir() {
        let report = ingest_directory(input, &IngestOptions::default())?;
        for f in &report.errors {
            tracing::warn!(path = %f.path.display(), line = ?f.line, code = %f.code, "skipped transcript");
        }
        Ok(report.documents)
    } else {
        jsonl::read(input)
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let opts = IngestOptions {
        language: a.language,
        ..Default::default()
    };
    let report = ingest_directory(&a.dir, &opts)?;
    for f in &report.errors {
        tracing::warn!(path = %f.path.display(), line = ?f.line, code = %f.code, message = %f.message, "rejected transcript");
    }
    jsonl::write(&a.out, &report.documents)?;
    if let Some(m) = &a.manifest {
        jsonl::write_json(m, &report.manifest)?;
    }
    tracing::info!(files = report.files_scanned, documents = report.documents.len(), "ingested");
    print_json(&serde_json::json!({
        "files_scanned": report.files_scanned,
        "documents": report.documents.len(),
        "errors": report.errors,
        "manifest": report.manifest,
    }))?;
    if a.strict && !report.errors.is_empty() {
        return Err(Error::FilesRejected(report.errors.len()));
    }
    Ok(())
}

fn chunk(a: ChunkArgs, cfg: &ServiceConfig) -> Result<()> {
    let policy = ChunkPolicy::new(
        a.max_chars.unwrap_or(cfg.chunker.max_chars),
        a.overlap_chars.unwrap_or(cfg.chunker.overlap_chars),
    )?;
    let docs = load_documents(&a.input)?;
    let mut chunks: Vec<DocumentChunk> = Vec::new();
    for d in &docs {
        chunks.extend(chunker::split(d, &policy)?);
    }
    jsonl::write(&a.out, &chunks)?;
    print_json(&serde_json::json!({
        "documents": docs.len(),
        "chunks": chunks.len(),
        "policy": policy,
    }))
}

fn index_build(chunks_path: &Path, out: &Path, cfg: &ServiceConfig) -> Result<()> {
    let chunks: Vec<DocumentChunk> = jsonl::read(chunks_path)?;
    let embedder = cfg.embedder.build()?;
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let index = VectorIndex::new(embedder.dim())?;
    let stats = index.upsert(
        chunks
            .into_iter()
            .zip(vectors)
            .map(|(chunk, vector)| IndexedChunk { chunk, vector })
            .collect(),
    )?;
    index.save_snapshot(out)?;
    tracing::info!(chunks = index.len(), path = %out.display(), "snapshot written");
    print_json(&serde_json::json!({
        "inserted": stats.inserted,
        "replaced": stats.replaced,
        "dim": index.dim(),
        "embedder": embedder.model_name(),
        "out": out,
    }))
}

fn chat_model(cfg: &LlmClientConfig) -> Result<Arc<dyn ChatModel>> {
    Ok(Arc::new(RemoteChatModel::new(cfg)?))
}

/// Engine over the configured snapshot, or over an empty index when no
/// retrieval will happen.
fn build_engine(cfg: &ServiceConfig, snapshot: Option<&Path>, retrieve: bool) -> Result<RagEngine> {
    let llm = chat_model(&cfg.llm)?;
    if retrieve {
        let index = VectorIndex::load_snapshot(snapshot.unwrap_or(&cfg.snapshot_path))?;
        RagEngine::new(Arc::new(index), cfg.embedder.build()?, llm, cfg.llm.generation())
    } else {
        let embedder = server::idle_embedder(cfg.embedder.dim)?;
        let index = VectorIndex::new(cfg.embedder.dim)?;
        RagEngine::new(Arc::new(index), embedder, llm, cfg.llm.generation())
    }
}

fn ask(a: AskArgs, cfg: &ServiceConfig) -> Result<()> {
    let mut ecfg: EngineConfig = cfg.engine.clone();
    if a.no_rag {
        ecfg.use_rag = false;
    }
    if let Some(k) = a.k {
        ecfg.k = k;
    }
    if let Some(l) = a.language {
        ecfg.filter.language = Some(l);
    }
    ecfg.validate()?;
    if a.question.trim().is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let engine = build_engine(cfg, a.snapshot.as_deref(), ecfg.use_rag)?;
    let resp: QueryResponse = engine.respond(&a.question, &ecfg)?.into();
    if a.json {
        return print_json(&resp);
    }
    let mut out = std::io::stdout().lock();
    let w = |out: &mut std::io::StdoutLock, s: String| {
        writeln!(out, "{s}").map_err(|e| Error::io("stdout", e))
    };
    w(&mut out, resp.answer.clone())?;
    w(&mut out, String::new())?;
    if resp.sources.is_empty() {
        w(&mut out, "Sources: none".into())?;
    } else {
        w(&mut out, "Sources:".into())?;
        for (i, s) in resp.sources.iter().enumerate() {
            w(
                &mut out,
                format!(
                    "  [{}] {}  {} .. {}  score {:.4}",
                    i + 1,
                    s.chunk_id,
                    s.start_time.to_rfc3339(),
                    s.end_time.to_rfc3339(),
                    s.score
                ),
            )?;
        }
    }
    Ok(())
}

fn extract_qa(a: ExtractQaArgs, cfg: &ServiceConfig) -> Result<()> {
    let docs = load_documents(&a.corpus)?;
    let mut qcfg = cfg.qa.clone();
    if let Some(n) = a.pairs {
        qcfg.target_pairs = n;
    }
    if a.eval_from.is_some() {
        qcfg.eval_from = a.eval_from;
    }
    let llm = chat_model(&cfg.llm)?;
    let report = generate_corpus(&docs, llm.as_ref(), &qcfg)?;
    for f in &report.failures {
        tracing::warn!(doc = %f.doc_id, code = %f.code, message = %f.message, "generation failed");
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let path = |name: &str| -> PathBuf { a.out_dir.join(name) };
    jsonl::write(&path("fine_tune.jsonl"), &report.fine_tune)?;
    jsonl::write(&path("evaluation.jsonl"), &report.evaluation)?;
    jsonl::write_json(&path("manifest.json"), &report.manifest)?;
    print_json(&serde_json::json!({
        "documents": docs.len(),
        "fine_tune": report.fine_tune.len(),
        "evaluation": report.evaluation.len(),
        "failures": report.failures,
        "dropped_blocks": report.dropped_blocks,
        "duplicates_removed": report.duplicates_removed,
        "manifest": report.manifest,
    }))?;
    if report.fine_tune.is_empty() && report.evaluation.is_empty() && !docs.is_empty() {
        return Err(Error::NoPairsFound);
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, cfg: &ServiceConfig) -> Result<()> {
    let pairs: Vec<QAPair> = jsonl::read(&a.eval_set)?;
    if pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let retrieve = a.setting != SettingChoice::NoRag;
    let engine = build_engine(cfg, a.snapshot.as_deref(), retrieve)?;
    let metric_embedder = cfg.embedder.build()?;
    let judge_llm = match cfg.judge.kind {
        JudgeKind::Lexical => None,
        JudgeKind::Llm => {
            let mut llm = cfg.llm.clone();
            if let Some(url) = &cfg.judge.endpoint {
                llm.endpoint_url = url.clone();
            }
            if let Some(m) = &cfg.judge.model_id {
                llm.model_id = m.clone();
            }
            Some(chat_model(&llm)?)
        }
    };
    let judge = cfg.judge.build(judge_llm)?;
    let ecfg = EvalConfig {
        overlap_threshold: cfg.judge.overlap_threshold,
        judge_model_id: cfg.judge.model_id.clone(),
        chunk_policy: Some(cfg.chunker),
        k: Some(cfg.engine.k),
        ..cfg.eval.clone()
    };
    let settings: &[bool] = match a.setting {
        SettingChoice::Rag => &[true],
        SettingChoice::NoRag => &[false],
        SettingChoice::Both => &[true, false],
    };
    let mut report: Option<EvalReport> = None;
    for &use_rag in settings {
        let responder = engine.with_config(EngineConfig {
            use_rag,
            ..cfg.engine.clone()
        });
        let r = run_eval(&pairs, &responder, judge.as_ref(), metric_embedder.as_ref(), &ecfg)?;
        tracing::info!(setting = %r.rows[0].setting, failed = r.rows[0].failed, "evaluated");
        match report.as_mut() {
            Some(acc) => acc.merge(r),
            None => report = Some(r),
        }
    }
    let report = report.expect("at least one setting");
    jsonl::write_json(&a.out, &report)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", report.render_table()).map_err(|e| Error::io("stdout", e))
}
