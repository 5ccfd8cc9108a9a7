//! The evaluation rubric: five fixed axes, their weights, and the merge
//! that collapses per-axis subscores into one scalar reward.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the weight-sum check. Weights are validated, never
/// renormalized: a config typo should fail loudly, not be hidden.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Maximum rationale length before a judgment picks up a soft violation.
pub const MAX_RATIONALE_WORDS: usize = 20;

/// The five scored dimensions, in display/priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RubricAxis {
    Correctness,
    Safety,
    Reasoning,
    Factuality,
    Clarity,
}

impl RubricAxis {
    /// All five axes in priority order: Correctness > Safety > Reasoning >
    /// Factuality > Clarity.
    pub const ALL: [RubricAxis; 5] = [
        RubricAxis::Correctness,
        RubricAxis::Safety,
        RubricAxis::Reasoning,
        RubricAxis::Factuality,
        RubricAxis::Clarity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RubricAxis::Correctness => "correctness",
            RubricAxis::Safety => "safety",
            RubricAxis::Reasoning => "reasoning",
            RubricAxis::Factuality => "factuality",
            RubricAxis::Clarity => "clarity",
        }
    }

    /// The priority line rendered into judge prompts.
    pub fn priority_line() -> &'static str {
        "Correctness > Safety > Reasoning > Factuality > Clarity"
    }
}

impl fmt::Display for RubricAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RubricError {
    #[error("negative weight for axis {axis}: {value}")]
    NegativeWeight { axis: RubricAxis, value: f64 },
    #[error("weights sum to {sum}, expected 1.0 within {}", WEIGHT_SUM_TOLERANCE)]
    SumNotUnity { sum: f64 },
    #[error("score for axis {axis} out of [-1, 1]: {value}")]
    OutOfRangeScore { axis: RubricAxis, value: f64 },
    #[error("scalar reward out of [-1, 1]: {0}")]
    OutOfRangeReward(f64),
    #[error("failed to read weights file: {0}")]
    Io(String),
    #[error("failed to parse weights file: {0}")]
    Parse(String),
}

/// One weight per axis. A valid instance is a convex combination:
/// every weight non-negative, summing to 1 within [`WEIGHT_SUM_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RubricWeights {
    pub correctness: f64,
    pub safety: f64,
    pub reasoning: f64,
    pub factuality: f64,
    pub clarity: f64,
}

impl RubricWeights {
    /// The human-derived weight vector: 0.35, 0.25, 0.20, 0.15, 0.05.
    pub fn human_derived() -> Self {
        RubricWeights {
            correctness: 0.35,
            safety: 0.25,
            reasoning: 0.20,
            factuality: 0.15,
            clarity: 0.05,
        }
    }

    /// Uniform 0.2 per axis (the weight-scheme ablation variant).
    pub fn uniform() -> Self {
        RubricWeights {
            correctness: 0.2,
            safety: 0.2,
            reasoning: 0.2,
            factuality: 0.2,
            clarity: 0.2,
        }
    }

    pub fn get(&self, axis: RubricAxis) -> f64 {
        match axis {
            RubricAxis::Correctness => self.correctness,
            RubricAxis::Safety => self.safety,
            RubricAxis::Reasoning => self.reasoning,
            RubricAxis::Factuality => self.factuality,
            RubricAxis::Clarity => self.clarity,
        }
    }

    /// Valid iff all weights are >= 0 and they sum to 1.0 within tolerance.
    pub fn validate(&self) -> Result<(), RubricError> {
        for axis in RubricAxis::ALL {
            let value = self.get(axis);
            if value < 0.0 || !value.is_finite() {
                return Err(RubricError::NegativeWeight { axis, value });
            }
        }
        let sum: f64 = RubricAxis::ALL.iter().map(|&a| self.get(a)).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(RubricError::SumNotUnity { sum });
        }
        Ok(())
    }

    /// Load and validate weights from a TOML file with one decimal value per
    /// axis key (`correctness`, `safety`, `reasoning`, `factuality`, `clarity`).
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, RubricError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RubricError::Io(format!("{}: {e}", path.as_ref().display())))?;
        let weights: RubricWeights =
            toml::from_str(&text).map_err(|e| RubricError::Parse(e.to_string()))?;
        weights.validate()?;
        Ok(weights)
    }

    /// Deterministic one-line rendering used in prompt templates,
    /// e.g. `correctness=0.35, safety=0.25, ...`.
    pub fn summary(&self) -> String {
        RubricAxis::ALL
            .iter()
            .map(|&a| format!("{}={}", a.name(), self.get(a)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Per-axis scores in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScores {
    pub correctness: f64,
    pub safety: f64,
    pub reasoning: f64,
    pub factuality: f64,
    pub clarity: f64,
}

impl AxisScores {
    pub fn get(&self, axis: RubricAxis) -> f64 {
        match axis {
            RubricAxis::Correctness => self.correctness,
            RubricAxis::Safety => self.safety,
            RubricAxis::Reasoning => self.reasoning,
            RubricAxis::Factuality => self.factuality,
            RubricAxis::Clarity => self.clarity,
        }
    }

    pub fn validate(&self) -> Result<(), RubricError> {
        for axis in RubricAxis::ALL {
            let value = self.get(axis);
            if !(-1.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(RubricError::OutOfRangeScore { axis, value });
            }
        }
        Ok(())
    }
}

/// A scalar reward in [-1, 1], the value handed to the RL trainer.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarReward(f64);

impl ScalarReward {
    pub const NEUTRAL: ScalarReward = ScalarReward(0.0);

    pub fn new(value: f64) -> Result<Self, RubricError> {
        if !(-1.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(RubricError::OutOfRangeReward(value));
        }
        Ok(ScalarReward(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Which of the two candidate answers the judge prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::A => f.write_str("A"),
            Choice::B => f.write_str("B"),
        }
    }
}

/// One parsed judge verdict. Field presence depends on the judging mode:
/// `better` is absent in single-answer mode, `subscores` is absent in
/// zero-shot binary mode, and a naive-prompt reply carries `better` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub better: Option<Choice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ScalarReward>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subscores: Option<AxisScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// Whitespace-separated token count after trimming, per the 20-word limit.
pub fn rationale_word_count(rationale: &str) -> usize {
    rationale.split_whitespace().count()
}

/// Validate a weight vector. Returns the offending axis or sum on failure.
pub fn validate_weights(weights: &RubricWeights) -> Result<(), RubricError> {
    weights.validate()
}

/// Merge per-axis scores into a scalar reward: `r = sum_i w_i * score_i`.
///
/// With valid weights this is a convex combination, so the result stays in
/// [-1, 1]; the final clamp only trims float dust at the boundary.
pub fn merge_axis_scores(
    scores: &AxisScores,
    weights: &RubricWeights,
) -> Result<ScalarReward, RubricError> {
    weights.validate()?;
    scores.validate()?;
    let r: f64 = RubricAxis::ALL
        .iter()
        .map(|&axis| weights.get(axis) * scores.get(axis))
        .sum();
    Ok(ScalarReward(r.clamp(-1.0, 1.0)))
}
