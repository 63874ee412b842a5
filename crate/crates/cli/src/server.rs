//! Read-only HTTP service over a loaded snapshot.
//!
//! `GET /healthz` reports readiness, `POST /v1/query` answers questions and
//! `POST /v1/ingest` is reserved (501). Readiness requires the snapshot to be
//! loaded and both endpoints to answer a probe; until then queries get 503.

use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use newsrag::embed::{DeterministicEmbedder, Embedder, EmbedderKind};
use newsrag::engine::{EngineConfig, RagEngine};
use newsrag::index::VectorIndex;
use newsrag::llm::{ChatModel, RemoteChatModel};
use newsrag::{Error, ErrorCategory, GenerationParams, Result};

use crate::config::ServiceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub use_rag: Option<bool>,
}

/// Where an answer came from: enough to locate the recording segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub chunk_id: String,
    pub recording_id: String,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub score: f64,
    /// Character offsets of the chunk in the recording transcript.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub answer: String,
    pub sources: Vec<SourceRef>,
    pub model_id: String,
    pub template_version: String,
}

impl From<newsrag::engine::Response> for QueryResponse {
    fn from(r: newsrag::engine::Response) -> Self {
        let sources = r
            .answer
            .sources
            .iter()
            .zip(&r.contexts)
            .map(|(hit, chunk)| SourceRef {
                chunk_id: hit.chunk_id.clone(),
                recording_id: chunk.metadata.recording_id.clone(),
                start_time: chunk.metadata.start_time,
                end_time: chunk.metadata.end_time,
                score: hit.score,
                char_span: chunk.char_span,
            })
            .collect();
        QueryResponse {
            answer: r.answer.text,
            sources,
            model_id: r.answer.model_id,
            template_version: r.answer.template_version,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub retriable: bool,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, retriable: bool) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                retriable,
            },
        }
    }

    fn not_ready(detail: &str) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "NOT_READY", detail, true)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match (&e, e.category()) {
            (Error::IndexEmpty, _) => StatusCode::SERVICE_UNAVAILABLE,
            (_, ErrorCategory::Validation) => StatusCode::BAD_REQUEST,
            (_, ErrorCategory::Endpoint) => StatusCode::SERVICE_UNAVAILABLE,
            (_, ErrorCategory::Io) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string(), e.is_retriable())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let retry = self.body.retriable;
        let mut resp = (self.status, Json(serde_json::json!({ "error": self.body }))).into_response();
        if retry {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, header::HeaderValue::from_static("5"));
        }
        resp
    }
}

pub struct AppState {
    cfg: ServiceConfig,
    engine: OnceLock<Arc<RagEngine>>,
    detail: Mutex<String>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            cfg,
            engine: OnceLock::new(),
            detail: Mutex::new("starting".into()),
        })
    }

    /// Already-prepared engine; the service is ready immediately.
    pub fn with_engine(cfg: ServiceConfig, engine: Arc<RagEngine>) -> Arc<Self> {
        let state = Self::new(cfg);
        let _ = state.engine.set(engine);
        state
    }

    pub fn is_ready(&self) -> bool {
        self.engine.get().is_some()
    }

    fn set_detail(&self, d: impl Into<String>) {
        *self.detail.lock().unwrap_or_else(|p| p.into_inner()) = d.into();
    }

    fn detail(&self) -> String {
        self.detail.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Loads the snapshot, then probes the endpoints until they answer.
    /// Runs on its own thread; the snapshot is read once.
    pub fn spawn_readiness(self: &Arc<Self>) -> std::thread::JoinHandle<()> {
        let state = Arc::clone(self);
        std::thread::spawn(move || {
            let interval = Duration::from_secs(state.cfg.probe_interval_s.max(1));
            let mut index: Option<Arc<VectorIndex>> = None;
            loop {
                match state.try_prepare(&mut index) {
                    Ok(engine) => {
                        let _ = state.engine.set(engine);
                        state.set_detail("ready");
                        tracing::info!(chunks = index.map_or(0, |i| i.len()), "service ready");
                        return;
                    }
                    Err(e) => {
                        tracing::warn!(code = e.code(), error = %e, "not ready");
                        state.set_detail(format!("{}: {e}", e.code()));
                    }
                }
                std::thread::sleep(interval);
            }
        })
    }

    fn try_prepare(&self, index: &mut Option<Arc<VectorIndex>>) -> Result<Arc<RagEngine>> {
        if index.is_none() {
            let loaded = load_snapshot(&self.cfg.snapshot_path)?;
            tracing::info!(path = %self.cfg.snapshot_path.display(), chunks = loaded.len(), "snapshot loaded");
            *index = Some(Arc::new(loaded));
        }
        let index = index.clone().expect("loaded above");
        let embedder = self.cfg.embedder.build()?;
        let llm: Arc<dyn ChatModel> = Arc::new(RemoteChatModel::new(&self.cfg.llm)?);
        if self.cfg.embedder.kind == EmbedderKind::Remote {
            embedder.embed_text("health probe")?;
        }
        llm.complete(
            "health probe",
            &GenerationParams {
                max_new_tokens: 1,
                temperature: 0.0,
            },
        )?;
        Ok(Arc::new(RagEngine::new(
            index,
            embedder,
            llm,
            self.cfg.llm.generation(),
        )?))
    }
}

pub fn load_snapshot(path: &Path) -> Result<VectorIndex> {
    VectorIndex::load_snapshot(path)
}

/// Placeholder encoder for engines that never retrieve.
pub fn idle_embedder(dim: usize) -> Result<Arc<dyn Embedder>> {
    Ok(Arc::new(DeterministicEmbedder::new(dim)?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/query", post(query))
        .route("/v1/ingest", post(ingest))
        .with_state(state)
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    if state.is_ready() {
        (StatusCode::OK, Json(serde_json::json!({ "status": "ready" }))).into_response()
    } else {
        (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({ "status": "starting", "detail": state.detail() })),
        )
            .into_response()
    }
}

async fn ingest() -> ApiError {
    ApiError::new(
        StatusCode::NOT_IMPLEMENTED,
        "NOT_IMPLEMENTED",
        "the service is read-only; ingest and index offline with the CLI",
        false,
    )
}

async fn query(
    State(state): State<Arc<AppState>>,
    body: std::result::Result<Json<QueryRequest>, JsonRejection>,
) -> std::result::Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body.map_err(|r| {
        ApiError::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", r.body_text(), false)
    })?;
    if req.question.trim().is_empty() {
        return Err(Error::EmptyQuestion.into());
    }
    let Some(engine) = state.engine.get().cloned() else {
        return Err(ApiError::not_ready(&state.detail()));
    };
    let mut cfg: EngineConfig = state.cfg.engine.clone();
    if let Some(k) = req.k {
        cfg.k = k;
    }
    if let Some(lang) = req.language {
        cfg.filter.language = Some(lang);
    }
    if let Some(r) = req.use_rag {
        cfg.use_rag = r;
    }
    let question = req.question;
    let resp = tokio::task::spawn_blocking(move || engine.respond(&question, &cfg))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string(), false)
        })??;
    Ok(Json(resp.into()))
}

/// Binds, starts the readiness probe and serves until Ctrl-C.
pub fn serve(cfg: ServiceConfig) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    let addr = cfg.bind_addr.clone();
    let state = AppState::new(cfg);
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Error::io(&addr, e))?;
        let local = listener.local_addr().map_err(|e| Error::io(&addr, e))?;
        tracing::info!(addr = %local, "listening");
        // machine-readable for supervisors and tests binding port 0
        println!("listening on {local}");
        state.spawn_readiness();
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await
            .map_err(|e| Error::io(&addr, e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_statuses() {
        let e: ApiError = Error::EmptyQuestion.into();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        let e: ApiError = Error::EndpointUnavailable {
            status: Some(503),
            retriable: true,
            message: "down".into(),
        }
        .into();
        assert_eq!(e.status, StatusCode::SERVICE_UNAVAILABLE);
        assert!(e.body.retriable);
        let e: ApiError = Error::IndexEmpty.into();
        assert_eq!(e.status, StatusCode::SERVICE_UNAVAILABLE);
        let e: ApiError = Error::io("x", std::io::Error::other("boom")).into();
        assert_eq!(e.status, StatusCode::INTERNAL_SERVER_ERROR);
    }

    #[test]
    fn request_defaults() {
        let r: QueryRequest = serde_json::from_str(r#"{"question":"q"}"#).unwrap();
        assert_eq!(r.k, None);
        assert_eq!(r.use_rag, None);
    }
}
