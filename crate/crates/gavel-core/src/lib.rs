//! Core domain logic for the gavel reward engine: the evaluation rubric and
//! scalar merge, prompt assembly with in-context demonstrations, strict
//! verdict parsing with flag-and-requeue, sliding-window chunk planning, and
//! the pairwise preference objective.
//!
//! Everything here is pure and synchronous; wire concerns live in
//! `gavel-backend`.

pub mod chunk;
pub mod parser;
pub mod preference;
pub mod prompt;
pub mod rubric;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chunk::{plan_chunks, window_texts, Chunk, ChunkPlan};
pub use parser::{
    parse_judgment, parse_judgment_str, requeue_policy, ParseOptions, ParseOutcome, RawCompletion,
    RequeueDecision, DEFAULT_MAX_PARSE_ATTEMPTS, NEUTRAL_FALLBACK_REWARD,
};
pub use preference::{
    finite_diff_check, pair_loss, pairwise_accuracy, write_pair_loss_csv, AccuracyItem,
    AccuracyReport, GradCheck, PairLoss, PairLossRow, PairScores, PreferenceError, Tally,
};
pub use prompt::{
    estimate_tokens, select_demos, AssembledPrompt, DemoBlock, DemoRegistry, JudgeTask,
    PromptError, PromptForge, PromptMode, TemplateSet,
};
pub use rubric::{
    merge_axis_scores, rationale_word_count, validate_weights, AxisScores, Choice, Judgment,
    RubricAxis, RubricError, RubricWeights, ScalarReward, MAX_RATIONALE_WORDS,
    WEIGHT_SUM_TOLERANCE,
};

/// Benchmark slice: the four dataset segments preference pairs are
/// stratified into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slice {
    Chat,
    #[serde(rename = "Chat-Hard")]
    ChatHard,
    Safety,
    Reasoning,
}

impl Slice {
    pub const ALL: [Slice; 4] = [
        Slice::Chat,
        Slice::ChatHard,
        Slice::Safety,
        Slice::Reasoning,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Slice::Chat => "Chat",
            Slice::ChatHard => "Chat-Hard",
            Slice::Safety => "Safety",
            Slice::Reasoning => "Reasoning",
        }
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Slice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Chat" => Ok(Slice::Chat),
            "Chat-Hard" => Ok(Slice::ChatHard),
            "Safety" => Ok(Slice::Safety),
            "Reasoning" => Ok(Slice::Reasoning),
            other => Err(format!("unknown slice: {other}")),
        }
    }
}
