//! Chat-completion endpoint client.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{endpoint, JsonClient, RetryPolicy};
use crate::types::GenerationParams;

/// A text-in, text-out language model.
pub trait ChatModel: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String>;
}

/// Body of `POST {endpoint_url}/chat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub max_new_tokens: u32,
    /// Keep at 0.0 for evaluation runs.
    pub temperature: f64,
    pub timeout_ms: u64,
    pub max_concurrent: usize,
    pub retry: RetryPolicy,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            endpoint_url: "http://127.0.0.1:8081".into(),
            model_id: "news-reporter-3b".into(),
            max_new_tokens: 512,
            temperature: 0.0,
            timeout_ms: 120_000,
            max_concurrent: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl LlmClientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("llm: max_new_tokens must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidConfig("llm: temperature must be >= 0".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::InvalidConfig("llm: timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationParams {
        GenerationParams {
            max_new_tokens: self.max_new_tokens,
            temperature: self.temperature,
        }
    }
}

pub struct RemoteChatModel {
    model_id: String,
    url: String,
    client: JsonClient,
}

impl RemoteChatModel {
    pub fn new(config: &LlmClientConfig) -> Result<Self> {
        config.validate()?;
        Ok(RemoteChatModel {
            model_id: config.model_id.clone(),
            url: endpoint(&config.endpoint_url, "chat"),
            client: JsonClient::new(config.timeout_ms, config.max_concurrent, config.retry),
        })
    }
}

impl ChatModel for RemoteChatModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        let body = ChatRequest {
            model: self.model_id.clone(),
            prompt: prompt.to_string(),
            max_new_tokens: params.max_new_tokens,
            temperature: params.temperature,
        };
        let resp: ChatResponse = self.client.post(&self.url, &body)?;
        Ok(resp.text)
    }
}
