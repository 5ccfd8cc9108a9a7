//! The pluggable completion backend: trait, generation parameters, and
//! wire-level configuration.

use std::time::Duration;

use async_trait::async_trait;
use gavel_core::{AssembledPrompt, RawCompletion};
use serde::Deserialize;
use thiserror::Error;

/// Sampling parameters sent with every completion request. The defaults are
/// hard: temperature 0 and top-p 1.0, overridable only through explicit
/// config, so judging stays deterministic unless someone opts out.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            top_p: 1.0,
            max_output_tokens: 512,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(BackendError::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::InvalidConfig(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidConfig(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Retry policy for transient wire errors.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_backoff: Duration,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 3,
            base_backoff: Duration::from_millis(200),
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer};
    use std::time::Duration;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Wire configuration for an HTTP backend.
#[derive(Debug, Clone, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub model_name: String,
    /// Per-request timeout, seconds.
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryConfig,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_in_flight() -> usize {
    8
}

impl BackendConfig {
    /// Build a config from the `JUDGE_BACKEND_URL`, `JUDGE_BACKEND_KEY`, and
    /// `JUDGE_MODEL_NAME` environment variables.
    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint_url = std::env::var("JUDGE_BACKEND_URL")
            .map_err(|_| BackendError::InvalidConfig("JUDGE_BACKEND_URL is not set".to_string()))?;
        let model_name = std::env::var("JUDGE_MODEL_NAME")
            .map_err(|_| BackendError::InvalidConfig("JUDGE_MODEL_NAME is not set".to_string()))?;
        Ok(BackendConfig {
            endpoint_url,
            api_key: std::env::var("JUDGE_BACKEND_KEY").ok(),
            model_name,
            request_timeout_secs: default_timeout_secs(),
            max_in_flight: default_max_in_flight(),
            retry: RetryConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight == 0 {
            return Err(BackendError::InvalidConfig(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.retry.max_attempts == 0 {
            return Err(BackendError::InvalidConfig(
                "retry.max_attempts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Errors surfaced by a single backend call. The gateway retries
/// `Transient` and `Timeout`; everything else fails fast.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("authentication rejected: {0}")]
    AuthRejected(String),
    #[error("backend does not support {0}")]
    UnsupportedCapability(String),
    #[error("unknown fingerprint: {0} (scripted fixture is incomplete)")]
    UnknownFingerprint(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_) | BackendError::Timeout(_))
    }
}

/// Any text-completion source the engine can judge with: a live
/// chat-completions endpoint or the scripted mock.
#[async_trait]
pub trait CompletionBackend: Send + Sync {
    /// Complete one assembled prompt.
    async fn complete(
        &self,
        prompt: &AssembledPrompt,
        params: &GenerationParams,
    ) -> Result<RawCompletion, BackendError>;

    /// `log p(continuation | context)` in nats, summed over continuation
    /// tokens as reported by the backend.
    async fn loglik(&self, context: &str, continuation: &str) -> Result<f64, BackendError>;

    /// Whether [`CompletionBackend::loglik`] is available.
    fn supports_loglik(&self) -> bool;

    /// Identifier recorded on completions (model name or "scripted").
    fn id(&self) -> String;
}
