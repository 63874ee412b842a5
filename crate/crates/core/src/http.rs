//! Blocking JSON-over-HTTP client shared by the embedding and chat endpoints:
//! bounded concurrency plus exponential backoff on retriable failures.

use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            ..Default::default()
        }
    }

    /// Delay before retry number `attempt` (0-based): `base * 2^attempt`,
    /// capped, plus up to 10% jitter.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        let jitter = if exp >= 10 {
            rand::thread_rng().gen_range(0..=exp / 10)
        } else {
            0
        };
        Duration::from_millis(exp + jitter)
    }
}

/// Counting semaphore capping in-flight requests.
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock();
        while *n == 0 {
            self.freed.wait(&mut n);
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.freed.notify_one();
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl JsonClient {
    pub fn new(timeout_ms: u64, max_concurrent: usize, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient {
            agent,
            retry,
            limiter: Limiter::new(max_concurrent),
        }
    }

    /// POSTs `body` as JSON, retrying 429/5xx and transport failures.
    pub fn post<Req, Resp>(&self, url: &str, body: &Req) -> Result<Resp>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let mut attempt = 0;
        loop {
            match self.post_once(url, body) {
                Err(e) if e.is_retriable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    tracing::warn!(url, attempt = attempt + 1, delay_ms = delay.as_millis() as u64, error = %e, "retrying request");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once<Req, Resp>(&self, url: &str, body: &Req) -> Result<Resp>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let _permit = self.limiter.acquire();
        let mut resp = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| Error::EndpointUnavailable {
                status: None,
                retriable: true,
                message: e.to_string(),
            })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::EndpointUnavailable {
                status: Some(status),
                retriable: status == 429 || status >= 500,
                message: truncate(&detail, 200),
            });
        }
        resp.body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_json()
            .map_err(|e| Error::EndpointUnavailable {
                status: Some(status),
                retriable: false,
                message: format!("unreadable response body: {e}"),
            })
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

/// Joins a base URL and a path without doubling slashes.
pub(crate) fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}
