use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::ResponseCache;
use super::prompts::{AgentRequest, Stage};

/// Connection and sampling settings for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub name: String,
    #[serde(default)]
    pub endpoint_url: String,
    pub model_id: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles per attempt, capped at 16x.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_max_output_tokens() -> u32 {
    2048
}
fn default_timeout() -> f64 {
    120.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

pub const MAX_RETRIES_LIMIT: u32 = 8;

impl ProviderConfig {
    pub fn mock(model_id: &str) -> Self {
        Self {
            name: "mock".into(),
            endpoint_url: String::new(),
            model_id: model_id.into(),
            api_key_env: default_key_env(),
            max_output_tokens: default_max_output_tokens(),
            temperature: 0.0,
            request_timeout_s: default_timeout(),
            max_retries: default_max_retries(),
            backoff_ms: 0,
        }
    }

    pub fn is_mock(&self) -> bool {
        self.name == "mock"
    }

    pub fn validate(&self) -> Result<(), CallError> {
        let bad = |msg: String| Err(CallError::InvalidConfig { name: self.name.clone(), detail: msg });
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_retries > MAX_RETRIES_LIMIT {
            return bad(format!("max_retries must be <= {MAX_RETRIES_LIMIT}, got {}", self.max_retries));
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive".into());
        }
        if !(self.request_timeout_s.is_finite() && self.request_timeout_s > 0.0) {
            return bad("request_timeout_s must be positive".into());
        }
        if !self.is_mock() && self.endpoint_url.trim().is_empty() {
            return bad("endpoint_url is required for non-mock providers".into());
        }
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty".into());
        }
        Ok(())
    }

    fn delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1 << retry.min(4)))
    }
}

/// Failure of a single provider attempt.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request rejected: {0}")]
    Rejected(String),
}

/// A chat-completion backend.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &AgentRequest<'_>, config: &ProviderConfig) -> Result<String, ProviderError>;
}

/// Outcome of [`call_provider`] after retries and cache lookup.
#[derive(Debug, Error)]
pub enum CallError {
    #[error("invalid provider config {name}: {detail}")]
    InvalidConfig { name: String, detail: String },
    #[error("{stage} call to {model_id} (clip {clip}) failed after {attempts} attempts: {last}")]
    Exhausted { stage: Stage, model_id: String, clip: String, attempts: u32, last: String },
    #[error("{stage} call to {model_id} (clip {clip}) was not authorized: {detail}")]
    Auth { stage: Stage, model_id: String, clip: String, detail: String },
    #[error("{stage} call to {model_id} (clip {clip}) returned a malformed response: {detail}")]
    Malformed { stage: Stage, model_id: String, clip: String, detail: String },
    #[error("{stage} call to {model_id} (clip {clip}) was rejected: {detail}")]
    Rejected { stage: Stage, model_id: String, clip: String, detail: String },
}

impl CallError {
    pub fn kind(&self) -> &'static str {
        match self {
            CallError::InvalidConfig { .. } => "invalid_config",
            CallError::Exhausted { .. } => "retries_exhausted",
            CallError::Auth { .. } => "auth",
            CallError::Malformed { .. } => "malformed_response",
            CallError::Rejected { .. } => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub text: String,
    pub attempts: u32,
    pub cached: bool,
}

/// Serves `request` from `cache` or the provider, retrying transient failures
/// with exponential backoff.
pub fn call_provider(
    request: &AgentRequest<'_>,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &ResponseCache,
) -> Result<CallOutcome, CallError> {
    config.validate()?;
    let key = ResponseCache::key(request, &config.model_id);
    if let Some(text) = cache.get(&key) {
        return Ok(CallOutcome { text, attempts: 0, cached: true });
    }

    let clip = request.clip_id().unwrap_or("-").to_string();
    let ctx = |detail: String| (request.stage, config.model_id.clone(), clip.clone(), detail);
    let mut attempts = 0;
    loop {
        attempts += 1;
        match provider.complete(request, config) {
            Ok(text) => {
                if let Err(e) = cache.put(&key, &text) {
                    // A failed cache write only costs a repeat call later.
                    eprintln!("warning: cache write failed for {key}: {e}");
                }
                return Ok(CallOutcome { text, attempts, cached: false });
            }
            Err(ProviderError::Transient(msg)) => {
                if attempts > config.max_retries {
                    let (stage, model_id, clip, last) = ctx(msg);
                    return Err(CallError::Exhausted { stage, model_id, clip, attempts, last });
                }
                std::thread::sleep(config.delay(attempts - 1));
            }
            Err(ProviderError::Auth(msg)) => {
                let (stage, model_id, clip, detail) = ctx(msg);
                return Err(CallError::Auth { stage, model_id, clip, detail });
            }
            Err(ProviderError::Malformed(msg)) => {
                let (stage, model_id, clip, detail) = ctx(msg);
                return Err(CallError::Malformed { stage, model_id, clip, detail });
            }
            Err(ProviderError::Rejected(msg)) => {
                let (stage, model_id, clip, detail) = ctx(msg);
                return Err(CallError::Rejected { stage, model_id, clip, detail });
            }
        }
    }
}

/// A provider bound to its config and a shared cache, counting network attempts.
pub struct AgentClient {
    config: ProviderConfig,
    provider: Arc<dyn Provider>,
    cache: Arc<ResponseCache>,
    network_calls: AtomicUsize,
}

impl AgentClient {
    pub fn new(config: ProviderConfig, provider: Arc<dyn Provider>, cache: Arc<ResponseCache>) -> Result<Self, CallError> {
        config.validate()?;
        Ok(Self { config, provider, cache, network_calls: AtomicUsize::new(0) })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn call(&self, request: &AgentRequest<'_>) -> Result<String, CallError> {
        let counted = CountingProvider { inner: self.provider.as_ref(), calls: &self.network_calls };
        call_provider(request, &self.config, &counted, &self.cache).map(|o| o.text)
    }

    /// Provider attempts issued so far (cache hits excluded).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }
}

struct CountingProvider<'a> {
    inner: &'a dyn Provider,
    calls: &'a AtomicUsize,
}

impl Provider for CountingProvider<'_> {
    fn complete(&self, request: &AgentRequest<'_>, config: &ProviderConfig) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request, config)
    }
}
