mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use newsrag::embed::{EmbedRequest, EmbedResponse, Embedder, EmbedderConfig, RemoteEmbedder};
use newsrag::llm::{ChatModel, ChatRequest, ChatResponse, LlmClientConfig, RemoteChatModel};
use newsrag::{Error, GenerationParams, RetryPolicy};

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    texts: AtomicUsize,
    failures_left: AtomicUsize,
}

const STUB_DIM: usize = 8;

async fn embed(
    State(c): State<Arc<Counters>>,
    Json(req): Json<EmbedRequest>,
) -> Result<Json<EmbedResponse>, StatusCode> {
    c.requests.fetch_add(1, Ordering::SeqCst);
    if c
        .failures_left
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    c.texts.fetch_add(req.texts.len(), Ordering::SeqCst);
    let vectors = req
        .texts
        .iter()
        .map(|t| {
            let mut v = vec![0.0f32; STUB_DIM];
            v[t.len() % STUB_DIM] = 1.0;
            v
        })
        .collect();
    Ok(Json(EmbedResponse { vectors }))
}

async fn chat(Json(req): Json<ChatRequest>) -> Json<ChatResponse> {
    Json(ChatResponse {
        text: format!("{}|{}|{}", req.model, req.max_new_tokens, req.prompt.len()),
    })
}

async fn always_503() -> StatusCode {
    StatusCode::SERVICE_UNAVAILABLE
}

async fn bad_request(State(c): State<Arc<Counters>>) -> StatusCode {
    c.requests.fetch_add(1, Ordering::SeqCst);
    StatusCode::BAD_REQUEST
}

fn stub(failures: usize) -> (String, Arc<Counters>) {
    let c = Arc::new(Counters::default());
    c.failures_left.store(failures, Ordering::SeqCst);
    let router = Router::new()
        .route("/embed", post(embed))
        .route("/chat", post(chat))
        .route("/down/embed", post(always_503))
        .route("/down/chat", post(always_503))
        .route("/bad/embed", post(bad_request))
        .with_state(c.clone());
    (common::serve(router), c)
}

fn embedder(url: String, retry: RetryPolicy) -> RemoteEmbedder {
    RemoteEmbedder::new(EmbedderConfig {
        endpoint_url: Some(url),
        dim: STUB_DIM,
        max_batch: 100,
        max_corpus: 1000,
        max_text_chars: 50,
        retry,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn batches_are_split_by_max_batch() {
    let (url, c) = stub(0);
    let e = embedder(url, RetryPolicy::none());
    let texts: Vec<String> = (0..250).map(|i| format!("text {i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let out = e.embed_batch(&refs).unwrap();
    assert_eq!(out.len(), 250);
    assert_eq!(c.requests.load(Ordering::SeqCst), 3);
    assert_eq!(c.texts.load(Ordering::SeqCst), 250);
    for (t, v) in texts.iter().zip(&out) {
        assert_eq!(v.values()[t.len() % STUB_DIM], 1.0);
    }
}

#[test]
fn unavailable_endpoint_is_retriable_error() {
    let (url, _) = stub(0);
    let e = embedder(format!("{url}/down"), RetryPolicy::none());
    let err = e.embed_text("hello").unwrap_err();
    assert!(
        matches!(
            err,
            Error::EndpointUnavailable {
                status: Some(503),
                retriable: true,
                ..
            }
        ),
        "{err:?}"
    );
    assert_eq!(err.code(), "ENDPOINT_UNAVAILABLE");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, c) = stub(0);
    let retry = RetryPolicy {
        max_retries: 3,
        base_delay_ms: 1,
        max_delay_ms: 2,
    };
    let e = embedder(format!("{url}/bad"), retry);
    let err = e.embed_text("hello").unwrap_err();
    assert!(matches!(
        err,
        Error::EndpointUnavailable {
            status: Some(400),
            retriable: false,
            ..
        }
    ));
    assert_eq!(c.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn transient_failures_are_retried() {
    let (url, c) = stub(2);
    let retry = RetryPolicy {
        max_retries: 3,
        base_delay_ms: 1,
        max_delay_ms: 4,
    };
    let e = embedder(url, retry);
    assert_eq!(e.embed_text("hello").unwrap().dim(), STUB_DIM);
    assert_eq!(c.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn input_checks_happen_before_any_request() {
    let (url, c) = stub(0);
    let e = embedder(url, RetryPolicy::none());
    assert!(matches!(e.embed_text("  "), Err(Error::EmptyInput)));
    assert!(matches!(
        e.embed_text(&"x".repeat(51)),
        Err(Error::TextTooLong { len: 51, max: 50 })
    ));
    let many = vec!["a"; 1001];
    assert!(matches!(
        e.embed_batch(&many),
        Err(Error::BatchTooLarge { len: 1001, max: 1000 })
    ));
    assert!(matches!(
        e.embed_batch(&["ok", ""]),
        Err(Error::EmptyInput)
    ));
    assert_eq!(c.requests.load(Ordering::SeqCst), 0);
}

#[test]
fn wrong_dimension_is_rejected() {
    let (url, _) = stub(0);
    let e = RemoteEmbedder::new(EmbedderConfig {
        endpoint_url: Some(url),
        dim: STUB_DIM + 1,
        ..Default::default()
    })
    .unwrap();
    assert!(matches!(
        e.embed_text("hi"),
        Err(Error::DimensionMismatch { expected: 9, got: 8 })
    ));
}

#[test]
fn unreachable_host_is_retriable() {
    let e = embedder("http://127.0.0.1:1".into(), RetryPolicy::none());
    let err = e.embed_text("hello").unwrap_err();
    assert!(err.is_retriable(), "{err:?}");
    assert!(matches!(err, Error::EndpointUnavailable { status: None, .. }));
}

#[test]
fn chat_client_round_trip() {
    let (url, _) = stub(0);
    let m = RemoteChatModel::new(&LlmClientConfig {
        endpoint_url: url.clone(),
        model_id: "stub-3b".into(),
        ..Default::default()
    })
    .unwrap();
    let params = GenerationParams {
        max_new_tokens: 64,
        temperature: 0.0,
    };
    assert_eq!(m.complete("hello", &params).unwrap(), "stub-3b|64|5");

    let down = RemoteChatModel::new(&LlmClientConfig {
        endpoint_url: format!("{url}/down"),
        retry: RetryPolicy::none(),
        ..Default::default()
    })
    .unwrap();
    assert!(down.complete("hello", &params).unwrap_err().is_retriable());
}
