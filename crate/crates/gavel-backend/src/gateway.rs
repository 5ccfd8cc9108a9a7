//! Batching, retry, and concurrency front of the completion backend.
//!
//! The gateway owns the policy layer: prompts sharing a document section are
//! grouped into sub-batches of at most eight and dispatched together,
//! transient wire errors are retried with exponential backoff, and in-flight
//! requests never exceed the configured ceiling.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::future::join_all;
use gavel_core::{AssembledPrompt, RawCompletion};
use serde::Deserialize;
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::backend::{
    BackendConfig, BackendError, CompletionBackend, GenerationParams, RetryConfig,
};
use crate::http::HttpBackend;
use crate::mock::ScriptedBackend;

/// Question-answer pairs referencing the same document are dispatched in
/// groups of at most this many, so the serving side can reuse its attention
/// context over the shared prefix.
pub const DOC_SUB_BATCH: usize = 8;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable for prompts {indices:?}: {message}")]
    BackendUnavailable {
        indices: Vec<usize>,
        message: String,
    },
    #[error("backend timed out for prompts {indices:?}: {message}")]
    Timeout {
        indices: Vec<usize>,
        message: String,
    },
    #[error("backend rejected credentials for prompts {indices:?}: {message}")]
    AuthRejected {
        indices: Vec<usize>,
        message: String,
    },
    #[error("backend does not support {0}")]
    UnsupportedCapability(String),
    #[error("empty prompt batch")]
    EmptyBatch,
    #[error("gateway config: {0}")]
    Config(String),
}

/// Plan the sub-batches for a prompt list: prompts sharing a `batch_key`
/// (same document section bytes) are grouped in order of first appearance
/// and split into runs of at most [`DOC_SUB_BATCH`]; keyless prompts ride in
/// their own singleton batches. Batch order never affects output order;
/// responses are re-scattered by index.
pub fn plan_sub_batches(prompts: &[AssembledPrompt]) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut open_by_key: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    for (index, prompt) in prompts.iter().enumerate() {
        match prompt.batch_key {
            None => batches.push(vec![index]),
            Some(key) => match open_by_key.get(&key) {
                Some(&slot) if batches[slot].len() < DOC_SUB_BATCH => {
                    batches[slot].push(index);
                }
                _ => {
                    batches.push(vec![index]);
                    open_by_key.insert(key, batches.len() - 1);
                }
            },
        }
    }
    batches
}

/// The backend plus its dispatch policy. Clones share the backend and the
/// in-flight semaphore, so the concurrency ceiling is global.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    semaphore: Arc<Semaphore>,
    retry: RetryConfig,
    max_in_flight: usize,
}

impl Gateway {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        max_in_flight: usize,
        retry: RetryConfig,
    ) -> Self {
        assert!(max_in_flight >= 1, "max_in_flight must be at least 1");
        Gateway {
            backend,
            semaphore: Arc::new(Semaphore::new(max_in_flight)),
            retry,
            max_in_flight,
        }
    }

    /// Gateway over a scripted mock with a small default policy.
    pub fn scripted(mock: Arc<ScriptedBackend>) -> Self {
        Gateway::new(
            mock,
            8,
            RetryConfig {
                max_attempts: 3,
                base_backoff: std::time::Duration::from_millis(1),
            },
        )
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    /// Complete every prompt, order-preserving. Transient failures are
    /// retried per prompt with exponential backoff up to
    /// `retry.max_attempts`; the error after exhaustion names the failing
    /// prompt indices.
    pub async fn complete_batch(
        &self,
        prompts: &[AssembledPrompt],
        params: &GenerationParams,
    ) -> Result<Vec<RawCompletion>, GatewayError> {
        if prompts.is_empty() {
            return Err(GatewayError::EmptyBatch);
        }
        params
            .validate()
            .map_err(|e| GatewayError::Config(e.to_string()))?;

        let plan = plan_sub_batches(prompts);
        let sub_batch_futures = plan.iter().map(|batch| {
            join_all(batch.iter().map(|&index| async move {
                let _permit = self
                    .semaphore
                    .acquire()
                    .await
                    .expect("gateway semaphore never closes");
                (
                    index,
                    self.complete_with_retry(&prompts[index], params).await,
                )
            }))
        });
        let nested = join_all(sub_batch_futures).await;

        let mut slots: Vec<Option<RawCompletion>> = (0..prompts.len()).map(|_| None).collect();
        let mut failures: Vec<(usize, BackendError)> = Vec::new();
        for batch in nested {
            for (index, result) in batch {
                match result {
                    Ok(completion) => slots[index] = Some(completion),
                    Err(e) => failures.push((index, e)),
                }
            }
        }
        if !failures.is_empty() {
            return Err(classify_failures(failures));
        }
        Ok(slots.into_iter().map(|s| s.expect("slot filled")).collect())
    }

    /// Single-prompt convenience over [`Gateway::complete_batch`] semantics.
    pub async fn complete_one(
        &self,
        prompt: &AssembledPrompt,
        params: &GenerationParams,
    ) -> Result<RawCompletion, GatewayError> {
        let _permit = self
            .semaphore
            .acquire()
            .await
            .expect("gateway semaphore never closes");
        self.complete_with_retry(prompt, params)
            .await
            .map_err(|e| classify_failures(vec![(0, e)]))
    }

    /// `log p(continuation | context)` in nats. An empty continuation is the
    /// empty product of probabilities: exactly 0.0, no wire call.
    pub async fn score_loglik(
        &self,
        context: &str,
        continuation: &str,
    ) -> Result<f64, GatewayError> {
        if !self.backend.supports_loglik() {
            return Err(GatewayError::UnsupportedCapability(
                "log-probabilities".to_string(),
            ));
        }
        if continuation.is_empty() {
            return Ok(0.0);
        }
        let _permit = self
            .semaphore
            .acquire()
            .await
            .expect("gateway semaphore never closes");
        let mut attempt = 1;
        loop {
            match self.backend.loglik(context, continuation).await {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    tokio::time::sleep(self.backoff(attempt)).await;
                    attempt += 1;
                }
                Err(BackendError::UnsupportedCapability(what)) => {
                    return Err(GatewayError::UnsupportedCapability(what))
                }
                Err(e) => return Err(classify_failures(vec![(0, e)])),
            }
        }
    }

    async fn complete_with_retry(
        &self,
        prompt: &AssembledPrompt,
        params: &GenerationParams,
    ) -> Result<RawCompletion, BackendError> {
        let mut attempt = 1;
        loop {
            match self.backend.complete(prompt, params).await {
                Ok(completion) => return Ok(completion),
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    tokio::time::sleep(self.backoff(attempt)).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn backoff(&self, attempt: u32) -> std::time::Duration {
        self.retry.base_backoff * 2u32.saturating_pow(attempt - 1)
    }
}

/// Collapse per-prompt failures into one gateway error. Credential problems
/// dominate (retrying cannot fix them), then timeouts, then availability.
fn classify_failures(failures: Vec<(usize, BackendError)>) -> GatewayError {
    let pick = |predicate: fn(&BackendError) -> bool| -> Option<(Vec<usize>, String)> {
        let hits: Vec<&(usize, BackendError)> =
            failures.iter().filter(|(_, e)| predicate(e)).collect();
        hits.first()
            .map(|(_, first)| (hits.iter().map(|(i, _)| *i).collect(), first.to_string()))
    };
    if let Some((indices, message)) = pick(|e| matches!(e, BackendError::AuthRejected(_))) {
        return GatewayError::AuthRejected { indices, message };
    }
    if let Some((indices, message)) = pick(|e| matches!(e, BackendError::Timeout(_))) {
        return GatewayError::Timeout { indices, message };
    }
    let indices: Vec<usize> = failures.iter().map(|(i, _)| *i).collect();
    let message = failures
        .first()
        .map(|(_, e)| e.to_string())
        .unwrap_or_default();
    GatewayError::BackendUnavailable { indices, message }
}

/// Backend selection file: either a live HTTP endpoint or a scripted
/// fixture. Settings here override the `JUDGE_BACKEND_*` environment.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendFileConfig {
    Http {
        #[serde(flatten)]
        config: BackendConfig,
    },
    Scripted {
        fixture: PathBuf,
        #[serde(default = "default_mock_in_flight")]
        max_in_flight: usize,
        #[serde(default)]
        retry: RetryConfig,
    },
}

fn default_mock_in_flight() -> usize {
    8
}

impl BackendFileConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.as_ref().display())))?;
        toml::from_str(&text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Resolve relative fixture paths against the config file's directory.
    pub fn build_gateway(self, base_dir: &Path) -> Result<Gateway, GatewayError> {
        match self {
            BackendFileConfig::Http { config } => {
                config
                    .validate()
                    .map_err(|e| GatewayError::Config(e.to_string()))?;
                let max_in_flight = config.max_in_flight;
                let retry = config.retry.clone();
                let backend =
                    HttpBackend::new(config).map_err(|e| GatewayError::Config(e.to_string()))?;
                Ok(Gateway::new(Arc::new(backend), max_in_flight, retry))
            }
            BackendFileConfig::Scripted {
                fixture,
                max_in_flight,
                retry,
            } => {
                let path = if fixture.is_absolute() {
                    fixture
                } else {
                    base_dir.join(fixture)
                };
                let mock = ScriptedBackend::from_fixture_path(&path)
                    .map_err(|e| GatewayError::Config(e.to_string()))?;
                Ok(Gateway::new(Arc::new(mock), max_in_flight, retry))
            }
        }
    }
}

/// Build a gateway from a backend file if given, otherwise from the
/// `JUDGE_BACKEND_URL` / `JUDGE_BACKEND_KEY` / `JUDGE_MODEL_NAME` env vars.
pub fn gateway_from_file_or_env(backend_file: Option<&Path>) -> Result<Gateway, GatewayError> {
    match backend_file {
        Some(path) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            BackendFileConfig::from_path(path)?.build_gateway(base)
        }
        None => {
            let config =
                BackendConfig::from_env().map_err(|e| GatewayError::Config(e.to_string()))?;
            let max_in_flight = config.max_in_flight;
            let retry = config.retry.clone();
            let backend =
                HttpBackend::new(config).map_err(|e| GatewayError::Config(e.to_string()))?;
            Ok(Gateway::new(Arc::new(backend), max_in_flight, retry))
        }
    }
}
