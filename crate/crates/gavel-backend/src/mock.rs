//! Deterministic scripted backend for GPU-free testing.
//!
//! Requests are looked up by a fingerprint of the prompt text; lookups are
//! total over the fixture set, so an unknown fingerprint is an explicit
//! failure, never a silent default.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use gavel_core::{AssembledPrompt, RawCompletion};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::backend::{BackendError, CompletionBackend, GenerationParams};

/// Fingerprint of a completion request: SHA-256 over the system and user
/// text with a domain tag, hex-encoded.
pub fn prompt_fingerprint(system_text: &str, user_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"completion\x00");
    hasher.update(system_text.as_bytes());
    hasher.update(b"\x00");
    hasher.update(user_text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Fingerprint of a log-likelihood request.
pub fn loglik_fingerprint(context: &str, continuation: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"loglik\x00");
    hasher.update(context.as_bytes());
    hasher.update(b"\x00");
    hasher.update(continuation.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Default)]
struct Entry {
    /// Replies served in order; the last one repeats forever.
    completions: Vec<String>,
    loglik: Option<f64>,
    /// Scripted transient failures served before any reply.
    transient_failures: u32,
}

#[derive(Debug, Default)]
struct State {
    entries: HashMap<String, Entry>,
    /// Requests observed per fingerprint, including failed attempts.
    observations: HashMap<String, u32>,
}

/// In-memory scripted backend. All responses and failures are canned;
/// observation counts let tests assert retry accounting.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    state: Mutex<State>,
}

/// One line of the scripted fixture file.
#[derive(Debug, Deserialize)]
struct FixtureLine {
    fingerprint: String,
    #[serde(default)]
    completion_text: Option<String>,
    #[serde(default)]
    loglik: Option<f64>,
    #[serde(default)]
    transient_failures: Option<u32>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load a fixture: JSONL of `{fingerprint, completion_text | loglik}`
    /// lines, optionally with `transient_failures`. Repeated completion
    /// fingerprints extend that fingerprint's reply sequence.
    pub fn from_fixture_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            BackendError::InvalidConfig(format!("{}: {e}", path.as_ref().display()))
        })?;
        Self::from_fixture_str(&text)
    }

    pub fn from_fixture_str(text: &str) -> Result<Self, BackendError> {
        let backend = Self::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(line).map_err(|e| {
                BackendError::InvalidConfig(format!("fixture line {}: {e}", idx + 1))
            })?;
            if parsed.completion_text.is_none() && parsed.loglik.is_none() {
                return Err(BackendError::InvalidConfig(format!(
                    "fixture line {}: needs completion_text or loglik",
                    idx + 1
                )));
            }
            let mut state = backend.state.lock().unwrap();
            let entry = state.entries.entry(parsed.fingerprint).or_default();
            if let Some(text) = parsed.completion_text {
                entry.completions.push(text);
            }
            if let Some(ll) = parsed.loglik {
                entry.loglik = Some(ll);
            }
            if let Some(n) = parsed.transient_failures {
                entry.transient_failures = n;
            }
        }
        Ok(backend)
    }

    /// Script one reply (appended to the fingerprint's sequence).
    pub fn script_completion(&self, fingerprint: &str, reply: impl Into<String>) {
        let mut state = self.state.lock().unwrap();
        state
            .entries
            .entry(fingerprint.to_string())
            .or_default()
            .completions
            .push(reply.into());
    }

    /// Script a reply for an already-assembled prompt.
    pub fn script_completion_for(&self, prompt: &AssembledPrompt, reply: impl Into<String>) {
        self.script_completion(
            &prompt_fingerprint(&prompt.system_text, &prompt.user_text),
            reply,
        );
    }

    /// Script `n` transient failures before the replies are served.
    pub fn script_transient_failures(&self, fingerprint: &str, n: u32) {
        let mut state = self.state.lock().unwrap();
        state
            .entries
            .entry(fingerprint.to_string())
            .or_default()
            .transient_failures = n;
    }

    pub fn script_loglik(&self, context: &str, continuation: &str, value: f64) {
        let mut state = self.state.lock().unwrap();
        state
            .entries
            .entry(loglik_fingerprint(context, continuation))
            .or_default()
            .loglik = Some(value);
    }

    /// How many times a fingerprint has been requested (failures included).
    pub fn observations(&self, fingerprint: &str) -> u32 {
        self.state
            .lock()
            .unwrap()
            .observations
            .get(fingerprint)
            .copied()
            .unwrap_or(0)
    }

    pub fn observations_for(&self, prompt: &AssembledPrompt) -> u32 {
        self.observations(&prompt_fingerprint(&prompt.system_text, &prompt.user_text))
    }
}

#[async_trait]
impl CompletionBackend for ScriptedBackend {
    async fn complete(
        &self,
        prompt: &AssembledPrompt,
        params: &GenerationParams,
    ) -> Result<RawCompletion, BackendError> {
        params.validate()?;
        let fp = prompt_fingerprint(&prompt.system_text, &prompt.user_text);
        let mut state = self.state.lock().unwrap();
        let seen = state.observations.entry(fp.clone()).or_insert(0);
        *seen += 1;
        let serve_index = *seen;
        let entry = state
            .entries
            .get(&fp)
            .ok_or_else(|| BackendError::UnknownFingerprint(fp.clone()))?;
        if serve_index <= entry.transient_failures {
            return Err(BackendError::Transient(format!(
                "scripted failure {serve_index}/{}",
                entry.transient_failures
            )));
        }
        if entry.completions.is_empty() {
            return Err(BackendError::UnknownFingerprint(format!(
                "{fp} has no completion scripted"
            )));
        }
        let reply_index = ((serve_index - entry.transient_failures - 1) as usize)
            .min(entry.completions.len() - 1);
        Ok(RawCompletion {
            text: entry.completions[reply_index].clone(),
            backend_id: "scripted".to_string(),
            latency_ms: 0,
        })
    }

    async fn loglik(&self, context: &str, continuation: &str) -> Result<f64, BackendError> {
        if continuation.is_empty() {
            return Ok(0.0);
        }
        let fp = loglik_fingerprint(context, continuation);
        let mut state = self.state.lock().unwrap();
        *state.observations.entry(fp.clone()).or_insert(0) += 1;
        state
            .entries
            .get(&fp)
            .and_then(|e| e.loglik)
            .ok_or(BackendError::UnknownFingerprint(fp))
    }

    fn supports_loglik(&self) -> bool {
        true
    }

    fn id(&self) -> String {
        "scripted".to_string()
    }
}
