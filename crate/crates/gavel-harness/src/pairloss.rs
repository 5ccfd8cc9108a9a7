//! Batch evaluation of the pairwise loss over a preference dataset, using
//! the backend's log-likelihood scoring hook.

use gavel_backend::{Gateway, GatewayError};
use gavel_core::preference::{pair_loss, PairLossRow, PairScores, PreferenceError};
use thiserror::Error;

use crate::dataset::PreferenceRecord;

#[derive(Debug, Error)]
pub enum PairLossError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
}

/// Score `log p(answer | prompt)` for both sides of every pair and compute
/// the loss rows for the batch report CSV.
pub async fn compute_pair_losses(
    dataset: &[PreferenceRecord],
    gateway: &Gateway,
) -> Result<Vec<PairLossRow>, PairLossError> {
    let mut rows = Vec::with_capacity(dataset.len());
    for record in dataset {
        let s_plus = gateway
            .score_loglik(&record.prompt, record.preferred_answer())
            .await?;
        let s_minus = gateway
            .score_loglik(&record.prompt, record.rejected_answer())
            .await?;
        let scores = PairScores::new(s_plus, s_minus)?;
        let loss = pair_loss(&scores)?;
        rows.push(PairLossRow {
            pair_id: record.id.clone(),
            s_plus,
            s_minus,
            loss: loss.value,
        });
    }
    Ok(rows)
}
