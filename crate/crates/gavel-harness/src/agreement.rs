//! Rationale-agreement study: have the judge explain its verdicts, then ask
//! a grader backend to rate each explanation's similarity to the human one
//! on the 0–10 integer scale.

use futures::stream::{self, StreamExt};
use gavel_backend::{Judge, JudgeError};
use gavel_core::PromptMode;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::PreferenceRecord;

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record {id} has no human rationale")]
    MissingRationale { id: String },
    #[error("grader failed on record {id}: {source}")]
    Grader { id: String, source: JudgeError },
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// One graded pair of explanations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRecord {
    pub id: String,
    pub model_rationale: String,
    pub human_rationale: String,
    pub similarity: u8,
}

/// Mean, median, and quartiles of the similarity scores, plus the full
/// 0–10 histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub histogram: Vec<usize>,
    pub records: Vec<AgreementRecord>,
}

/// Inclusive linear-interpolation quantile over a sorted slice.
fn quantile(sorted: &[u8], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0] as f64;
    }
    let position = q * (n - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    let weight = position - lower as f64;
    sorted[lower] as f64 * (1.0 - weight) + sorted[upper] as f64 * weight
}

/// Judge every record at temperature 0 to obtain its rationale, then ask
/// the grader backend for a 0–10 similarity vs the human rationale.
///
/// A terminally flagged verdict contributes its (empty) rationale rather
/// than aborting, and the grader simply rates it low. A grader that never
/// produces an integer fails the run.
pub async fn run_rationale_agreement(
    dataset: &[PreferenceRecord],
    judge: &Judge,
    grader: &Judge,
) -> Result<AgreementReport, AgreementError> {
    if dataset.is_empty() {
        return Err(AgreementError::EmptyDataset);
    }
    for record in dataset {
        if record.human_rationale.is_none() {
            return Err(AgreementError::MissingRationale {
                id: record.id.clone(),
            });
        }
    }

    let concurrency = judge.gateway().max_in_flight().max(1);
    let graded: Vec<Result<AgreementRecord, AgreementError>> =
        stream::iter(dataset.iter().map(|record| async move {
            let verdict = judge
                .judge_pair(
                    &PromptMode::ZeroShot,
                    &record.prompt,
                    &record.answer_a,
                    &record.answer_b,
                )
                .await?;
            let model_rationale = verdict
                .judgment
                .and_then(|j| j.rationale)
                .unwrap_or_default();
            let human_rationale = record
                .human_rationale
                .clone()
                .expect("checked before dispatch");
            let similarity = grader
                .grade_similarity(&model_rationale, &human_rationale)
                .await
                .map_err(|source| AgreementError::Grader {
                    id: record.id.clone(),
                    source,
                })?;
            Ok(AgreementRecord {
                id: record.id.clone(),
                model_rationale,
                human_rationale,
                similarity,
            })
        }))
        .buffered(concurrency)
        .collect()
        .await;

    let records: Vec<AgreementRecord> = graded.into_iter().collect::<Result<_, _>>()?;
    let mut sorted: Vec<u8> = records.iter().map(|r| r.similarity).collect();
    sorted.sort_unstable();
    let mut histogram = vec![0usize; 11];
    for &s in &sorted {
        histogram[s as usize] += 1;
    }
    let mean = sorted.iter().map(|&s| s as f64).sum::<f64>() / sorted.len() as f64;
    Ok(AgreementReport {
        n: records.len(),
        mean,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        histogram,
        records,
    })
}
