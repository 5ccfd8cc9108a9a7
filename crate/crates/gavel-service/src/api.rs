//! HTTP reward service: POST /v1/score, POST /v1/compare, GET /v1/health.
//!
//! The service is stateless across requests: identical bodies against a
//! deterministic backend produce identical verdicts. The reported latency is
//! wall-clock and excluded from that guarantee.

use std::fs::OpenOptions;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gavel_backend::{score_long_answer, ChunkScore, DocumentContext, Judge, LongDocError};
use gavel_core::{AxisScores, Choice, PromptMode};
use serde::{Deserialize, Serialize};

/// One scoring request. A present `document` routes through the chunked
/// long-document path; otherwise the answer is scored directly against the
/// prompt.
#[derive(Debug, Clone, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub response: String,
    #[serde(default)]
    pub document: Option<String>,
    /// `zero_shot` (default, single-answer) or `long_document`; the pairwise
    /// modes have no meaning for a single answer.
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subscores: Option<AxisScores>,
    pub rationale: String,
    pub flagged: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompareRequest {
    pub prompt: String,
    pub answer_a: String,
    pub answer_b: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub better: Option<Choice>,
    pub score: Option<f64>,
    pub rationale: String,
    pub flagged: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

/// Shared service state.
pub struct ServiceState {
    pub judge: Judge,
    pub window_tokens: usize,
    pub auth_token: Option<String>,
    trace: Option<TraceWriter>,
    request_seq: AtomicU64,
}

struct TraceWriter {
    path: std::path::PathBuf,
    lock: Mutex<()>,
}

#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    request_seq: u64,
    #[serde(flatten)]
    chunk: &'a ChunkScore,
}

impl ServiceState {
    pub fn new(judge: Judge, window_tokens: usize) -> Self {
        ServiceState {
            judge,
            window_tokens,
            auth_token: None,
            trace: None,
            request_seq: AtomicU64::new(0),
        }
    }

    pub fn with_auth_token(mut self, token: Option<String>) -> Self {
        self.auth_token = token;
        self
    }

    pub fn with_trace_path(mut self, path: Option<std::path::PathBuf>) -> Self {
        self.trace = path.map(|path| TraceWriter {
            path,
            lock: Mutex::new(()),
        });
        self
    }

    fn write_trace(&self, request_seq: u64, trace: &[ChunkScore]) {
        let Some(writer) = &self.trace else { return };
        let _guard = writer.lock.lock().unwrap();
        let Ok(mut file) = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&writer.path)
        else {
            eprintln!("chunk trace open failed: {}", writer.path.display());
            return;
        };
        for chunk in trace {
            let line = serde_json::to_string(&TraceLine { request_seq, chunk })
                .expect("trace line serializes");
            if writeln!(file, "{line}").is_err() {
                eprintln!("chunk trace write failed");
                return;
            }
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/score", post(handle_score))
        .route("/v1/compare", post(handle_compare))
        .route("/v1/health", get(handle_health))
        .with_state(state)
}

fn client_error(message: impl Into<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
        .into_response()
}

fn backend_error(message: String) -> Response {
    (
        StatusCode::SERVICE_UNAVAILABLE,
        [(header::RETRY_AFTER, "5")],
        Json(ErrorBody { error: message }),
    )
        .into_response()
}

fn check_auth(state: &ServiceState, headers: &HeaderMap) -> Result<(), Box<Response>> {
    let Some(expected) = &state.auth_token else {
        return Ok(());
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(expected.as_str()) {
        Ok(())
    } else {
        Err(Box::new(
            (
                StatusCode::UNAUTHORIZED,
                Json(ErrorBody {
                    error: "missing or invalid bearer token".into(),
                }),
            )
                .into_response(),
        ))
    }
}

async fn handle_health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn handle_score(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Json(request): Json<ScoreRequest>,
) -> Response {
    if let Err(response) = check_auth(&state, &headers) {
        return *response;
    }
    if request.response.trim().is_empty() {
        return client_error("field \"response\" must be non-empty");
    }
    match request.mode.as_deref() {
        None | Some("zero_shot") | Some("long_document") => {}
        Some(other) => {
            return client_error(format!(
                "mode {other:?} is not valid for single-answer scoring"
            ))
        }
    }
    if request.mode.as_deref() == Some("long_document") && request.document.is_none() {
        return client_error("long_document mode requires a \"document\" field");
    }

    let started = Instant::now();
    match &request.document {
        Some(document) => {
            let ctx = DocumentContext::new(document, &request.prompt, &request.response)
                .with_window_tokens(state.window_tokens);
            match score_long_answer(&state.judge, &ctx).await {
                Ok(outcome) => {
                    let seq = state.request_seq.fetch_add(1, Ordering::Relaxed);
                    state.write_trace(seq, &outcome.trace);
                    // report the rationale of the window that set the reward
                    let deciding = outcome
                        .trace
                        .iter()
                        .find(|c| c.reward == outcome.reward.value());
                    let rationale = deciding
                        .and_then(|c| c.judgment.as_ref())
                        .and_then(|j| j.rationale.clone())
                        .unwrap_or_default();
                    let flagged = outcome.trace.iter().any(|c| c.flagged);
                    Json(ScoreResponse {
                        reward: outcome.reward.value(),
                        subscores: None,
                        rationale,
                        flagged,
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                    .into_response()
                }
                Err(LongDocError::EmptyDocument) => client_error("document is empty"),
                Err(LongDocError::EmptyAnswer) => client_error("response is empty"),
                Err(LongDocError::WindowTooSmall(w)) => {
                    client_error(format!("window of {w} tokens is too small"))
                }
                Err(LongDocError::Judge(e)) => backend_error(e.to_string()),
            }
        }
        None => match state
            .judge
            .judge_answer(&request.prompt, &request.response)
            .await
        {
            Ok(verdict) => Json(ScoreResponse {
                reward: verdict.reward.value(),
                subscores: verdict.judgment.as_ref().and_then(|j| j.subscores),
                rationale: verdict
                    .judgment
                    .as_ref()
                    .and_then(|j| j.rationale.clone())
                    .unwrap_or_default(),
                flagged: verdict.flagged_terminal,
                latency_ms: started.elapsed().as_millis() as u64,
            })
            .into_response(),
            Err(e) => backend_error(e.to_string()),
        },
    }
}

async fn handle_compare(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Json(request): Json<CompareRequest>,
) -> Response {
    if let Err(response) = check_auth(&state, &headers) {
        return *response;
    }
    if request.answer_a.trim().is_empty() || request.answer_b.trim().is_empty() {
        return client_error("both answers must be non-empty");
    }
    let started = Instant::now();
    match state
        .judge
        .judge_pair(
            &PromptMode::ZeroShot,
            &request.prompt,
            &request.answer_a,
            &request.answer_b,
        )
        .await
    {
        Ok(verdict) => Json(CompareResponse {
            better: verdict.judgment.as_ref().and_then(|j| j.better),
            score: verdict
                .judgment
                .as_ref()
                .and_then(|j| j.score)
                .map(|s| s.value()),
            rationale: verdict
                .judgment
                .as_ref()
                .and_then(|j| j.rationale.clone())
                .unwrap_or_default(),
            flagged: verdict.flagged_terminal,
            latency_ms: started.elapsed().as_millis() as u64,
        })
        .into_response(),
        Err(e) => backend_error(e.to_string()),
    }
}
