//! Batch client for chat-completion endpoints.
//!
//! Requests run with a caller-set bound on concurrency, transient failures
//! are retried with exponential backoff, and every raw response is appended
//! to a log that [`replay_log`] turns back into the same results.

mod client;
mod rawlog;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{parse_completion, run_batch, run_batch_blocking};
pub use rawlog::{replay_log, LogRecord, LOG_FORMAT, LOG_VERSION};

pub const DEFAULT_TEMPERATURE: f64 = 0.05;
pub const DEFAULT_MAX_TOKENS_CEILING: u32 = 1300;

pub const ENV_BASE_URL: &str = "CRYPTOLANG_API_BASE";
pub const ENV_API_KEY: &str = "CRYPTOLANG_API_KEY";
pub const ENV_MODEL: &str = "CRYPTOLANG_MODEL";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration missing: set {0}")]
    MissingConfig(&'static str),
    #[error("request {id:?}: {reason}")]
    InvalidRequest { id: String, reason: String },
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error("cannot build HTTP client: {0}")]
    Client(#[source] reqwest::Error),
    #[error("{}: {source}", path.display())]
    Log { path: PathBuf, source: std::io::Error },
    #[error("malformed log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error("cannot start async runtime: {0}")]
    Runtime(#[source] std::io::Error),
}

/// Endpoint, credential and limits shared by every request of a batch.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Everything before `/chat/completions`, e.g. `https://host/v1`.
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub max_tokens_ceiling: u32,
    pub request_timeout: Duration,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        GatewayConfig {
            base_url: base_url.into(),
            api_key: api_key.into(),
            model: model.into(),
            max_tokens_ceiling: DEFAULT_MAX_TOKENS_CEILING,
            request_timeout: Duration::from_secs(120),
        }
    }

    /// Reads [`ENV_BASE_URL`], [`ENV_API_KEY`] and [`ENV_MODEL`].
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Like [`from_env`](Self::from_env) with a custom variable source.
    /// Empty values count as missing.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let get = |k: &'static str| lookup(k).filter(|v| !v.trim().is_empty()).ok_or(GatewayError::MissingConfig(k));
        Ok(Self::new(get(ENV_BASE_URL)?, get(ENV_API_KEY)?, get(ENV_MODEL)?))
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub instance_id: String,
    pub model_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl InferenceRequest {
    pub fn validate(&self, max_tokens_ceiling: u32) -> Result<(), GatewayError> {
        let bad = |reason: String| GatewayError::InvalidRequest {
            id: self.instance_id.clone(),
            reason,
        };
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(bad(format!("temperature {} is not a non-negative number", self.temperature)));
        }
        if self.max_tokens == 0 || self.max_tokens > max_tokens_ceiling {
            return Err(bad(format!("max_tokens {} outside [1, {max_tokens_ceiling}]", self.max_tokens)));
        }
        Ok(())
    }
}

/// Outcome of one request: a completion or an error, never both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub instance_id: String,
    pub completion: Option<String>,
    pub error: Option<String>,
    pub attempt_count: u32,
    pub wall_time_ms: u64,
}

impl InferenceResult {
    pub fn is_ok(&self) -> bool {
        self.completion.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `failed + 1`, after `failed` failures:
    /// initial × 2^(failed−1), capped.
    pub fn backoff(&self, failed: u32) -> Duration {
        let factor = 2u32.saturating_pow(failed.saturating_sub(1));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}
