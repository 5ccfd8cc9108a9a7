//! Wire client for any chat-completions-compatible HTTP endpoint.

use async_trait::async_trait;
use gavel_core::{AssembledPrompt, RawCompletion};
use serde::Deserialize;
use serde_json::json;

use crate::backend::{BackendConfig, BackendError, CompletionBackend, GenerationParams};

/// HTTP backend speaking the chat-completions JSON surface:
/// `{model, messages[{role, content}], temperature, top_p, max_tokens}`,
/// plus a `logprobs` flag for log-likelihood scoring.
pub struct HttpBackend {
    client: reqwest::Client,
    config: BackendConfig,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    logprobs: Option<LogProbs>,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: String,
}

#[derive(Debug, Deserialize)]
struct LogProbs {
    #[serde(default)]
    content: Vec<TokenLogProb>,
}

#[derive(Debug, Deserialize)]
struct TokenLogProb {
    logprob: f64,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend { client, config })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    async fn post(&self, body: serde_json::Value) -> Result<ChatResponse, BackendError> {
        let mut request = self.client.post(&self.config.endpoint_url).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(e.to_string())
            } else {
                BackendError::Transient(e.to_string())
            }
        })?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(BackendError::AuthRejected(format!("HTTP {status}")));
        }
        if status.is_server_error()
            || status == reqwest::StatusCode::TOO_MANY_REQUESTS
            || status == reqwest::StatusCode::REQUEST_TIMEOUT
        {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}")));
        }
        response
            .json::<ChatResponse>()
            .await
            .map_err(|e| BackendError::Fatal(format!("malformed response body: {e}")))
    }
}

#[async_trait]
impl CompletionBackend for HttpBackend {
    async fn complete(
        &self,
        prompt: &AssembledPrompt,
        params: &GenerationParams,
    ) -> Result<RawCompletion, BackendError> {
        params.validate()?;
        let body = json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_output_tokens,
        });
        let started = std::time::Instant::now();
        let parsed = self.post(body).await?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Fatal("response carried no choices".to_string()))?;
        Ok(RawCompletion {
            text: choice.message.content,
            backend_id: self.config.model_name.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    async fn loglik(&self, context: &str, continuation: &str) -> Result<f64, BackendError> {
        if continuation.is_empty() {
            return Ok(0.0);
        }
        let body = json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "user", "content": context},
                {"role": "assistant", "content": continuation},
            ],
            "logprobs": true,
            "max_tokens": 1,
            "temperature": 0.0,
            "top_p": 1.0,
        });
        let parsed = self.post(body).await?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Fatal("response carried no choices".to_string()))?;
        let logprobs = choice
            .logprobs
            .ok_or_else(|| BackendError::UnsupportedCapability("log-probabilities".to_string()))?;
        Ok(logprobs.content.iter().map(|t| t.logprob).sum())
    }

    fn supports_loglik(&self) -> bool {
        // Capability is discovered per request; servers that cannot return
        // logprobs produce UnsupportedCapability at call time.
        true
    }

    fn id(&self) -> String {
        self.config.model_name.clone()
    }
}
