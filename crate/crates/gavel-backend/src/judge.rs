//! The judging pipeline: assemble a prompt, obtain a completion through the
//! gateway, parse it against the output contract, and re-query flagged
//! completions until the attempt budget runs out.

use gavel_core::parser::{
    parse_judgment, requeue_policy, ParseOptions, ParseOutcome, RequeueDecision,
    DEFAULT_MAX_PARSE_ATTEMPTS,
};
use gavel_core::prompt::{AssembledPrompt, JudgeTask, PromptError, PromptForge, PromptMode};
use gavel_core::rubric::{merge_axis_scores, Judgment, RubricError, RubricWeights, ScalarReward};
use gavel_core::DemoRegistry;
use thiserror::Error;

use crate::backend::GenerationParams;
use crate::flaglog::FlagLog;
use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error("grader reply not an integer 0-10 after {attempts} attempts (last reply: {last:?})")]
    GraderNonInteger { attempts: u32, last: String },
}

/// Pipeline knobs beyond the backend itself.
#[derive(Debug, Clone)]
pub struct JudgeConfig {
    pub params: GenerationParams,
    /// Re-query budget for flagged completions.
    pub max_parse_attempts: u32,
    /// Strip markdown fences instead of flagging them (for backends that
    /// cannot suppress fences).
    pub lenient_fences: bool,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            params: GenerationParams::default(),
            max_parse_attempts: DEFAULT_MAX_PARSE_ATTEMPTS,
            lenient_fences: false,
        }
    }
}

/// The final word on one judging request.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    /// `None` when every attempt stayed flagged.
    pub judgment: Option<Judgment>,
    /// Scalar reward: the merged subscores when present, the score field
    /// otherwise, or the neutral fallback for terminal flags.
    pub reward: ScalarReward,
    pub violations: Vec<String>,
    pub flagged_terminal: bool,
    /// Reason of the last flag when `flagged_terminal`.
    pub flag_reason: Option<String>,
    pub attempts: u32,
    pub latency_ms: u64,
}

/// A configured judge: prompt forge + demo registry + rubric weights +
/// gateway. Immutable after construction; safe to share across tasks.
pub struct Judge {
    forge: PromptForge,
    registry: DemoRegistry,
    weights: RubricWeights,
    gateway: Gateway,
    config: JudgeConfig,
    flag_log: Option<FlagLog>,
}

impl Judge {
    pub fn new(
        gateway: Gateway,
        forge: PromptForge,
        registry: DemoRegistry,
        weights: RubricWeights,
        config: JudgeConfig,
    ) -> Result<Self, JudgeError> {
        weights.validate()?;
        Ok(Judge {
            forge,
            registry,
            weights,
            gateway,
            config,
            flag_log: None,
        })
    }

    pub fn with_flag_log(mut self, log: FlagLog) -> Self {
        self.flag_log = Some(log);
        self
    }

    pub fn weights(&self) -> &RubricWeights {
        &self.weights
    }

    pub fn forge(&self) -> &PromptForge {
        &self.forge
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// The exact prompt a pairwise judging call will send, exposed so test
    /// fixtures can be scripted against real prompt bytes.
    pub fn pair_prompt(
        &self,
        mode: &PromptMode,
        task_prompt: &str,
        answer_a: &str,
        answer_b: &str,
    ) -> Result<AssembledPrompt, JudgeError> {
        let demos = match mode {
            PromptMode::FewShot(k) => self.registry.select(*k as usize)?,
            _ => Vec::new(),
        };
        Ok(self.forge.build_prompt(
            mode,
            &JudgeTask::Pairwise {
                prompt: task_prompt,
                answer_a,
                answer_b,
            },
            &demos,
            &self.weights,
        )?)
    }

    /// The exact prompt a single-answer scoring call will send.
    pub fn single_prompt(&self, task_prompt: &str, answer: &str) -> AssembledPrompt {
        self.forge.build_single_prompt(task_prompt, answer)
    }

    /// The exact prompt one long-document chunk will send.
    pub fn longdoc_prompt(&self, window: &str, question: &str, answer: &str) -> AssembledPrompt {
        self.forge.build_longdoc_prompt(window, question, answer)
    }

    /// The exact prompt a rationale-similarity grading call will send.
    pub fn grader_prompt(&self, model_rationale: &str, human_rationale: &str) -> AssembledPrompt {
        self.forge
            .build_grader_prompt(model_rationale, human_rationale)
    }

    /// Judge a preference pair in any pairwise mode.
    pub async fn judge_pair(
        &self,
        mode: &PromptMode,
        task_prompt: &str,
        answer_a: &str,
        answer_b: &str,
    ) -> Result<Verdict, JudgeError> {
        let prompt = self.pair_prompt(mode, task_prompt, answer_a, answer_b)?;
        self.complete_and_parse(&prompt, &self.parse_options(mode))
            .await
    }

    /// Score a single answer against its task prompt (the documentless
    /// score-and-rationale contract).
    pub async fn judge_answer(
        &self,
        task_prompt: &str,
        answer: &str,
    ) -> Result<Verdict, JudgeError> {
        let prompt = self.single_prompt(task_prompt, answer);
        self.complete_and_parse(&prompt, &self.parse_options(&PromptMode::LongDocument))
            .await
    }

    /// Score one long-document window.
    pub async fn judge_longdoc_chunk(
        &self,
        window: &str,
        question: &str,
        answer: &str,
    ) -> Result<Verdict, JudgeError> {
        let prompt = self.longdoc_prompt(window, question, answer);
        self.complete_and_parse(&prompt, &self.parse_options(&PromptMode::LongDocument))
            .await
    }

    /// Ask the backend to rate the similarity of two rationales on the 0-10
    /// integer scale; non-integer replies are re-queried up to the parse
    /// budget.
    pub async fn grade_similarity(
        &self,
        model_rationale: &str,
        human_rationale: &str,
    ) -> Result<u8, JudgeError> {
        let prompt = self.grader_prompt(model_rationale, human_rationale);
        let mut last = String::new();
        for attempt in 1..=self.config.max_parse_attempts {
            let completion = self
                .gateway
                .complete_one(&prompt, &self.config.params)
                .await?;
            match completion.text.trim().parse::<u8>() {
                Ok(v) if v <= 10 => return Ok(v),
                _ => {
                    last = completion.text;
                    self.log_flag("grader reply not an integer 0-10", &last, attempt);
                }
            }
        }
        Err(JudgeError::GraderNonInteger {
            attempts: self.config.max_parse_attempts,
            last,
        })
    }

    fn parse_options(&self, mode: &PromptMode) -> ParseOptions {
        ParseOptions::for_mode(mode).with_lenient_fences(self.config.lenient_fences)
    }

    async fn complete_and_parse(
        &self,
        prompt: &AssembledPrompt,
        opts: &ParseOptions,
    ) -> Result<Verdict, JudgeError> {
        let mut attempt = 1u32;
        loop {
            let completion = self
                .gateway
                .complete_one(prompt, &self.config.params)
                .await?;
            let outcome = parse_judgment(&completion, opts);
            match &outcome {
                ParseOutcome::Parsed {
                    judgment,
                    violations,
                } => {
                    let reward = self.reward_of(judgment);
                    return Ok(Verdict {
                        judgment: Some(judgment.clone()),
                        reward,
                        violations: violations.clone(),
                        flagged_terminal: false,
                        flag_reason: None,
                        attempts: attempt,
                        latency_ms: completion.latency_ms,
                    });
                }
                ParseOutcome::Flagged { reason, raw } => {
                    self.log_flag(reason, raw, attempt);
                    match requeue_policy(&outcome, attempt, self.config.max_parse_attempts) {
                        Some(RequeueDecision::Retry) => attempt += 1,
                        Some(RequeueDecision::GiveUp { fallback_reward }) => {
                            return Ok(Verdict {
                                judgment: None,
                                reward: ScalarReward::new(fallback_reward)
                                    .expect("fallback reward in range"),
                                violations: Vec::new(),
                                flagged_terminal: true,
                                flag_reason: Some(reason.clone()),
                                attempts: attempt,
                                latency_ms: completion.latency_ms,
                            });
                        }
                        None => unreachable!("flagged outcome always yields a decision"),
                    }
                }
            }
        }
    }

    /// Subscores, when the judge emitted them, are merged through the weight
    /// vector; otherwise the score field stands as the reward.
    fn reward_of(&self, judgment: &Judgment) -> ScalarReward {
        if let Some(subscores) = &judgment.subscores {
            return merge_axis_scores(subscores, &self.weights)
                .expect("parser-validated subscores merge cleanly");
        }
        judgment.score.unwrap_or(ScalarReward::NEUTRAL)
    }

    fn log_flag(&self, reason: &str, raw: &str, attempt: u32) {
        if let Some(log) = &self.flag_log {
            if let Err(e) = log.append(reason, raw, attempt) {
                eprintln!("flag log write failed: {e}");
            }
        }
    }
}
