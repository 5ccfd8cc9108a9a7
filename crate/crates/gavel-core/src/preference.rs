//! Pairwise preference objective: the log-sigmoid loss over
//! (preferred, rejected) log-likelihoods, its analytic gradient, a
//! finite-difference oracle, and the pairwise-accuracy metric.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::Choice;
use crate::Slice;

#[derive(Debug, Error, PartialEq)]
pub enum PreferenceError {
    #[error("non-finite input: s_plus={s_plus}, s_minus={s_minus}")]
    NonFiniteInput { s_plus: f64, s_minus: f64 },
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("io: {0}")]
    Io(String),
}

/// Log-likelihoods of the preferred (`s_plus`) and rejected (`s_minus`)
/// answers, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub s_plus: f64,
    pub s_minus: f64,
}

impl PairScores {
    pub fn new(s_plus: f64, s_minus: f64) -> Result<Self, PreferenceError> {
        if !s_plus.is_finite() || !s_minus.is_finite() {
            return Err(PreferenceError::NonFiniteInput { s_plus, s_minus });
        }
        Ok(PairScores { s_plus, s_minus })
    }

    pub fn margin(&self) -> f64 {
        self.s_plus - self.s_minus
    }
}

/// Loss value and its gradient with respect to both scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairLoss {
    pub value: f64,
    pub grad_s_plus: f64,
    pub grad_s_minus: f64,
}

/// Numerically stable sigmoid.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stable -ln(sigmoid(x)): `ln(1 + e^-x)` for x >= 0, `-x + ln(1 + e^x)`
/// otherwise. The naive form overflows once |x| passes ~40.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Pairwise loss `-ln sigma(s_plus - s_minus)` with analytic gradients
/// `d/ds_plus = sigma(margin) - 1` and `d/ds_minus = 1 - sigma(margin)`.
pub fn pair_loss(scores: &PairScores) -> Result<PairLoss, PreferenceError> {
    if !scores.s_plus.is_finite() || !scores.s_minus.is_finite() {
        return Err(PreferenceError::NonFiniteInput {
            s_plus: scores.s_plus,
            s_minus: scores.s_minus,
        });
    }
    let margin = scores.margin();
    let grad_s_plus = sigmoid(margin) - 1.0;
    Ok(PairLoss {
        value: neg_log_sigmoid(margin),
        grad_s_plus,
        grad_s_minus: -grad_s_plus,
    })
}

/// Result of checking analytic gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// max over both coordinates of |numeric - analytic| / max(|analytic|, |numeric|)
    pub max_relative_error: f64,
    /// max over both coordinates of |numeric - analytic|
    pub max_absolute_error: f64,
    pub numeric_grad_s_plus: f64,
    pub numeric_grad_s_minus: f64,
}

/// Independent gradient oracle: central differences `(L(s+h) - L(s-h)) / 2h`
/// on each coordinate, compared against the analytic gradients.
///
/// The relative error is the headline number; near saturation (margins of
/// ~30 and beyond) both gradients underflow toward zero and the absolute
/// error is the meaningful check.
pub fn finite_diff_check(scores: &PairScores, h: f64) -> Result<GradCheck, PreferenceError> {
    assert!(h > 0.0 && h <= 1e-3, "h must be in (0, 1e-3]");
    let analytic = pair_loss(scores)?;
    let at = |s_plus: f64, s_minus: f64| -> Result<f64, PreferenceError> {
        Ok(pair_loss(&PairScores { s_plus, s_minus })?.value)
    };
    let num_plus = (at(scores.s_plus + h, scores.s_minus)?
        - at(scores.s_plus - h, scores.s_minus)?)
        / (2.0 * h);
    let num_minus = (at(scores.s_plus, scores.s_minus + h)?
        - at(scores.s_plus, scores.s_minus - h)?)
        / (2.0 * h);

    let rel = |numeric: f64, exact: f64| -> f64 {
        let denom = exact.abs().max(numeric.abs());
        if denom == 0.0 {
            0.0
        } else {
            (numeric - exact).abs() / denom
        }
    };
    let abs_plus = (num_plus - analytic.grad_s_plus).abs();
    let abs_minus = (num_minus - analytic.grad_s_minus).abs();
    Ok(GradCheck {
        max_relative_error: rel(num_plus, analytic.grad_s_plus)
            .max(rel(num_minus, analytic.grad_s_minus)),
        max_absolute_error: abs_plus.max(abs_minus),
        numeric_grad_s_plus: num_plus,
        numeric_grad_s_minus: num_minus,
    })
}

/// One benchmark pair outcome handed to the accuracy metric. `predicted` is
/// `None` when the judge never produced a usable verdict (terminal flag);
/// such records count as incorrect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyItem {
    pub predicted: Option<Choice>,
    pub gold: Choice,
    pub slice: Option<Slice>,
}

/// Correct/total tally with the derived fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Overall and per-slice pairwise accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Tally,
    pub per_slice: BTreeMap<Slice, Tally>,
}

impl AccuracyReport {
    pub fn overall_accuracy(&self) -> f64 {
        self.overall.accuracy()
    }
}

/// Fraction of judgments whose preference matches gold, overall and per
/// slice (slices appear only when tagged on the items). Permutation of the
/// input list cannot change the result.
pub fn pairwise_accuracy(items: &[AccuracyItem]) -> Result<AccuracyReport, PreferenceError> {
    if items.is_empty() {
        return Err(PreferenceError::EmptyEvaluationSet);
    }
    let mut overall = Tally {
        correct: 0,
        total: 0,
    };
    let mut per_slice: BTreeMap<Slice, Tally> = BTreeMap::new();
    for item in items {
        let correct = item.predicted == Some(item.gold);
        overall.total += 1;
        overall.correct += usize::from(correct);
        if let Some(slice) = item.slice {
            let tally = per_slice.entry(slice).or_insert(Tally {
                correct: 0,
                total: 0,
            });
            tally.total += 1;
            tally.correct += usize::from(correct);
        }
    }
    Ok(AccuracyReport { overall, per_slice })
}

/// One row of the batch loss report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLossRow {
    pub pair_id: String,
    pub s_plus: f64,
    pub s_minus: f64,
    pub loss: f64,
}

/// Write the batch loss report: CSV with columns pair_id, s_plus, s_minus, loss.
pub fn write_pair_loss_csv<W: Write>(
    mut out: W,
    rows: &[PairLossRow],
) -> Result<(), PreferenceError> {
    let io_err = |e: std::io::Error| PreferenceError::Io(e.to_string());
    writeln!(out, "pair_id,s_plus,s_minus,loss").map_err(io_err)?;
    for row in rows {
        let id = if row.pair_id.contains([',', '"', '\n']) {
            format!("\"{}\"", row.pair_id.replace('"', "\"\""))
        } else {
            row.pair_id.clone()
        };
        writeln!(out, "{id},{},{},{}", row.s_plus, row.s_minus, row.loss).map_err(io_err)?;
    }
    Ok(())
}
