//! JSON-over-HTTP endpoints shared by the generator, LLM and toxicity
//! clients. Secrets come from environment variables and never reach logs.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::detectors::{ScorerError, ToxicityScorer};
use crate::exec::RateLimiter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingKey(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    /// Client errors other than rate limiting are not worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::Http { status, .. } => *status == 429 || *status >= 500,
            ClientError::Transport(_) => true,
            ClientError::MissingKey(_) | ClientError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    /// Name of the environment variable holding a bearer token.
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    pub requests_per_second: Option<f64>,
    pub burst: u32,
    /// Model name passed to chat endpoints.
    pub model: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: String::new(),
            api_key_env: None,
            timeout_ms: 60_000,
            requests_per_second: None,
            burst: 1,
            model: None,
        }
    }
}

/// Replaces every occurrence of `secret` in `text`.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_owned(),
    }
}

#[derive(Clone)]
pub struct HttpEndpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    limiter: Option<Arc<RateLimiter>>,
}

impl std::fmt::Debug for HttpEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEndpoint")
            .field("url", &self.config.url)
            .field("api_key", &self.api_key.as_ref().map(|_| "[REDACTED]"))
            .finish()
    }
}

impl HttpEndpoint {
    /// Reads the API key from the configured environment variable.
    pub fn from_config(config: EndpointConfig) -> Result<Self, ClientError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ClientError::MissingKey(var.clone()))?),
            None => None,
        };
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: EndpointConfig, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms.max(1)))
            .build();
        let limiter = config
            .requests_per_second
            .filter(|r| *r > 0.0)
            .map(|r| Arc::new(RateLimiter::new(r, config.burst)));
        HttpEndpoint {
            config,
            agent,
            api_key,
            limiter,
        }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn post_json(&self, body: &Value) -> Result<Value, ClientError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let key = self.api_key.as_deref();
        log::debug!(
            "POST {} (auth: {})",
            self.config.url,
            if key.is_some() { "bearer [REDACTED]" } else { "none" }
        );
        let mut req = self
            .agent
            .post(&self.config.url)
            .set("Content-Type", "application/json");
        if let Some(k) = key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| ClientError::Decode(redact(&e.to_string(), key))),
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                let body = redact(&body, key);
                log::warn!("POST {} failed with HTTP {status}", self.config.url);
                Err(ClientError::Http { status, body })
            }
            Err(e) => {
                let msg = redact(&e.to_string(), key);
                log::warn!("POST {} failed: {msg}", self.config.url);
                Err(ClientError::Transport(msg))
            }
        }
    }
}

/// Toxicity service speaking `{"text": ...}` -> `{"score": p}`.
#[derive(Debug, Clone)]
pub struct HttpToxicityScorer {
    endpoint: HttpEndpoint,
}

impl HttpToxicityScorer {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        HttpToxicityScorer { endpoint }
    }
}

impl ToxicityScorer for HttpToxicityScorer {
    fn score(&self, text: &str) -> Result<f64, ScorerError> {
        let resp = self
            .endpoint
            .post_json(&json!({ "text": text }))
            .map_err(|e| ScorerError(e.to_string()))?;
        resp.get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| ScorerError("response lacks numeric `score`".into()))
    }
}
