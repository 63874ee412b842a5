use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{endpoint, JsonClient};
use crate::types::EmbeddingVector;

use super::{Embedder, EmbedderConfig};

/// Body of `POST {endpoint_url}/embed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f32>>,
}

/// Client for an external sentence-encoder service.
pub struct RemoteEmbedder {
    config: EmbedderConfig,
    url: String,
    client: JsonClient,
}

impl RemoteEmbedder {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        config.validate()?;
        let base = config
            .endpoint_url
            .clone()
            .ok_or_else(|| Error::InvalidConfig("remote embedder needs endpoint_url".into()))?;
        Ok(RemoteEmbedder {
            url: endpoint(&base, "embed"),
            client: JsonClient::new(config.timeout_ms, config.max_concurrent, config.retry),
            config,
        })
    }

    fn check_text(&self, text: &str) -> Result<()> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        let len = text.chars().count();
        if len > self.config.max_text_chars {
            return Err(Error::TextTooLong {
                len,
                max: self.config.max_text_chars,
            });
        }
        Ok(())
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let body = EmbedRequest {
            model: self.config.model_name.clone(),
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let resp: EmbedResponse = self.client.post(&self.url, &body)?;
        if resp.vectors.len() != texts.len() {
            return Err(Error::EndpointUnavailable {
                status: None,
                retriable: false,
                message: format!(
                    "asked for {} vectors, received {}",
                    texts.len(),
                    resp.vectors.len()
                ),
            });
        }
        resp.vectors
            .into_iter()
            .map(|values| {
                if values.len() != self.config.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.dim,
                        got: values.len(),
                    });
                }
                EmbeddingVector::new(values)
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.check_text(text)?;
        Ok(self.request(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        if texts.len() > self.config.max_corpus {
            return Err(Error::BatchTooLarge {
                len: texts.len(),
                max: self.config.max_corpus,
            });
        }
        for t in texts {
            self.check_text(t)?;
        }
        let parts: Vec<Vec<EmbeddingVector>> = texts
            .par_chunks(self.config.max_batch)
            .map(|chunk| self.request(chunk))
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().flatten().collect())
    }
}
