//! Drive the judge over a preference dataset and aggregate per-slice
//! accuracy.

use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use gavel_backend::{Judge, JudgeError};
use gavel_core::preference::{pairwise_accuracy, AccuracyItem};
use gavel_core::PromptMode;
use thiserror::Error;

use crate::dataset::PreferenceRecord;
use crate::report::{RecordOutcome, SliceReport};

/// Records judged between checkpoint writes, so a backend outage loses at
/// most this many paid calls.
pub const CHECKPOINT_EVERY: usize = 50;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("checkpoint io: {0}")]
    Checkpoint(String),
    #[error("inconsistent report: overall accuracy diverges from slice-weighted mean")]
    InconsistentReport,
}

/// Everything a benchmark run produces: the aggregate report plus the
/// per-record outcomes, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub report: SliceReport,
    pub rows: Vec<RecordOutcome>,
}

/// Judge every record in `mode` and aggregate. Records are dispatched
/// concurrently up to the gateway's in-flight ceiling; results are
/// aggregated in dataset order so reruns against a deterministic backend
/// reproduce every byte.
///
/// With `checkpoint` set, progress is persisted every
/// [`CHECKPOINT_EVERY`] records and previously completed records are
/// skipped on restart; a backend error persists partial progress
/// before propagating.
pub async fn run_benchmark(
    dataset: &[PreferenceRecord],
    mode: &PromptMode,
    judge: &Judge,
    checkpoint: Option<&Path>,
) -> Result<BenchOutcome, BenchError> {
    if dataset.is_empty() {
        return Err(BenchError::EmptyDataset);
    }

    let mut done: Vec<RecordOutcome> = Vec::with_capacity(dataset.len());
    let mut done_ids = std::collections::HashSet::new();
    if let Some(path) = checkpoint {
        for outcome in load_checkpoint(path)? {
            done_ids.insert(outcome.id.clone());
            done.push(outcome);
        }
    }

    let pending: Vec<&PreferenceRecord> = dataset
        .iter()
        .filter(|r| !done_ids.contains(&r.id))
        .collect();

    let concurrency = judge.gateway().max_in_flight().max(1);
    for chunk in pending.chunks(CHECKPOINT_EVERY) {
        let mut results = stream::iter(chunk.iter().map(|record| async move {
            let verdict = judge
                .judge_pair(mode, &record.prompt, &record.answer_a, &record.answer_b)
                .await?;
            Ok::<RecordOutcome, JudgeError>(RecordOutcome {
                id: record.id.clone(),
                slice: record.slice,
                gold: record.preferred,
                predicted: verdict.judgment.as_ref().and_then(|j| j.better),
                flagged: verdict.flagged_terminal,
                attempts: verdict.attempts,
            })
        }))
        .buffered(concurrency);

        let mut failure: Option<JudgeError> = None;
        while let Some(result) = results.next().await {
            match result {
                Ok(outcome) => done.push(outcome),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        drop(results);
        if let Some(e) = failure {
            if let Some(path) = checkpoint {
                write_checkpoint(path, &done)?;
            }
            return Err(e.into());
        }
        if let Some(path) = checkpoint {
            write_checkpoint(path, &done)?;
        }
    }

    // restore dataset order (checkpoint resume may have reordered)
    let index_of: std::collections::HashMap<&str, usize> = dataset
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    done.sort_by_key(|o| index_of.get(o.id.as_str()).copied().unwrap_or(usize::MAX));

    let outcome = aggregate(&done)?;
    Ok(outcome)
}

/// Fold per-record outcomes into the report. Exposed so checkpointed rows
/// can be re-aggregated without re-judging.
pub fn aggregate(rows: &[RecordOutcome]) -> Result<BenchOutcome, BenchError> {
    let items: Vec<AccuracyItem> = rows
        .iter()
        .map(|row| AccuracyItem {
            predicted: row.predicted,
            gold: row.gold,
            slice: row.slice,
        })
        .collect();
    let accuracy = pairwise_accuracy(&items).map_err(|_| BenchError::EmptyDataset)?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    let report = SliceReport::from_accuracy(&accuracy, flagged);
    if !report.is_consistent() {
        return Err(BenchError::InconsistentReport);
    }
    Ok(BenchOutcome {
        report,
        rows: rows.to_vec(),
    })
}

fn load_checkpoint(path: &Path) -> Result<Vec<RecordOutcome>, BenchError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Checkpoint(e.to_string()))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str::<RecordOutcome>(line)
                .map_err(|e| BenchError::Checkpoint(e.to_string()))?,
        );
    }
    Ok(rows)
}

fn write_checkpoint(path: &Path, rows: &[RecordOutcome]) -> Result<(), BenchError> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).expect("outcome serializes"));
        text.push('\n');
    }
    let tmp: PathBuf = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| BenchError::Checkpoint(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| BenchError::Checkpoint(e.to_string()))
}

/// Judge verdicts needed to brute-force a benchmark by hand; used by tests
/// as the independent recount and by the CLI for `--trace` output.
pub fn expected_accuracy_by_recount(rows: &[RecordOutcome]) -> (usize, usize) {
    let mut correct = 0;
    for row in rows {
        if row.predicted == Some(row.gold) {
            correct += 1;
        }
    }
    (correct, rows.len())
}
