//! Long-document scoring: window the document, score every window
//! independently against the same question and answer, take the minimum.

use std::io::Write;

use futures::future::join_all;
use gavel_core::chunk::window_texts;
use gavel_core::rubric::{Judgment, ScalarReward};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::{Judge, JudgeError};

/// Default window: the 32K-token context of the reference judge.
pub const DEFAULT_WINDOW_TOKENS: usize = 32_000;

/// One long-document scoring request.
#[derive(Debug, Clone)]
pub struct DocumentContext {
    pub document: String,
    pub question: String,
    pub answer: String,
    pub window_tokens: usize,
}

impl DocumentContext {
    pub fn new(
        document: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        DocumentContext {
            document: document.into(),
            question: question.into(),
            answer: answer.into(),
            window_tokens: DEFAULT_WINDOW_TOKENS,
        }
    }

    pub fn with_window_tokens(mut self, window_tokens: usize) -> Self {
        self.window_tokens = window_tokens;
        self
    }
}

/// Verdict for one window. Terminally flagged windows carry the neutral
/// fallback reward and no judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkScore {
    pub chunk_index: usize,
    pub reward: f64,
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Judgment>,
}

/// Final reward plus the full per-window trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LongDocOutcome {
    pub reward: ScalarReward,
    pub trace: Vec<ChunkScore>,
}

#[derive(Debug, Error)]
pub enum LongDocError {
    #[error("document is empty after trimming")]
    EmptyDocument,
    #[error("answer is empty after trimming")]
    EmptyAnswer,
    #[error("window must be at least 2 tokens, got {0}")]
    WindowTooSmall(usize),
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// Score a long answer: plan the windows, judge each one concurrently, and
/// aggregate by minimum: one bad window caps the reward, which is exactly
/// the point of chunked scoring.
pub async fn score_long_answer(
    judge: &Judge,
    ctx: &DocumentContext,
) -> Result<LongDocOutcome, LongDocError> {
    if ctx.window_tokens < 2 {
        return Err(LongDocError::WindowTooSmall(ctx.window_tokens));
    }
    let document = ctx.document.trim();
    if document.is_empty() {
        return Err(LongDocError::EmptyDocument);
    }
    if ctx.answer.trim().is_empty() {
        return Err(LongDocError::EmptyAnswer);
    }

    let windows = window_texts(document, ctx.window_tokens);
    let verdicts = join_all(
        windows
            .iter()
            .map(|window| judge.judge_longdoc_chunk(window, &ctx.question, &ctx.answer)),
    )
    .await;

    let mut trace = Vec::with_capacity(verdicts.len());
    let mut minimum = f64::INFINITY;
    for (chunk_index, verdict) in verdicts.into_iter().enumerate() {
        let verdict = verdict?;
        minimum = minimum.min(verdict.reward.value());
        trace.push(ChunkScore {
            chunk_index,
            reward: verdict.reward.value(),
            flagged: verdict.flagged_terminal,
            judgment: verdict.judgment,
        });
    }
    Ok(LongDocOutcome {
        reward: ScalarReward::new(minimum).expect("min of in-range rewards stays in range"),
        trace,
    })
}

/// Write the per-window trace as JSONL, one [`ChunkScore`] per line.
pub fn export_trace_jsonl<W: Write>(mut out: W, trace: &[ChunkScore]) -> std::io::Result<()> {
    for score in trace {
        let line = serde_json::to_string(score).expect("chunk score serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}
