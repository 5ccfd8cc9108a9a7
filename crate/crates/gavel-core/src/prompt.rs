//! Prompt assembly for the four judging modes, plus the in-context
//! demonstration registry.
//!
//! All wording lives in external template files (loadable via
//! [`TemplateSet::from_dir`]); the embedded copies are the shipped defaults.
//! Re-targeting the alignment goal is an edit to a text file, not a rebuild.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{parse_judgment_str, ParseOptions, ParseOutcome};
use crate::rubric::{RubricAxis, RubricWeights};
use crate::Slice;

/// Heuristic token estimate: ceil(character count / 4).
///
/// No tokenizer is pinned anywhere in the engine, which keeps it
/// backend-agnostic; the estimate is only used for budget warnings and
/// chunk planning.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// How the judge is prompted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    FewShot(u32),
    Naive,
    LongDocument,
}

impl PromptMode {
    pub fn is_pairwise(&self) -> bool {
        matches!(
            self,
            PromptMode::ZeroShot | PromptMode::FewShot(_) | PromptMode::Naive
        )
    }

    pub fn label(&self) -> String {
        match self {
            PromptMode::ZeroShot => "zero_shot".to_string(),
            PromptMode::FewShot(k) => format!("few_shot(k={k})"),
            PromptMode::Naive => "naive".to_string(),
            PromptMode::LongDocument => "long_document".to_string(),
        }
    }
}

/// One in-context demonstration: a preference pair plus the verdict the
/// judge is expected to emit for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoBlock {
    pub prompt: String,
    pub response_a: String,
    pub response_b: String,
    pub expected_json: String,
    pub slice: Slice,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("demo registry has no more {slice} demos (need one at position {position})")]
    InsufficientDemos { slice: Slice, position: usize },
    #[error("mode expects {expected} demos, got {actual}")]
    DemoCountMismatch { expected: usize, actual: usize },
    #[error("mode {mode} cannot judge this task shape")]
    TaskModeMismatch { mode: String },
    #[error("demo registry line {line}: {reason}")]
    RegistryLine { line: usize, reason: String },
    #[error("template file {name}: {reason}")]
    Template { name: String, reason: String },
    #[error("io: {0}")]
    Io(String),
}

/// Ordered demonstrations grouped by slice. Insertion order within a slice
/// is preserved so selection stays deterministic.
#[derive(Debug, Clone, Default)]
pub struct DemoRegistry {
    by_slice: BTreeMap<Slice, Vec<DemoBlock>>,
}

/// Round-robin order over the three most error-prone slices.
const SELECTION_ORDER: [Slice; 3] = [Slice::ChatHard, Slice::Safety, Slice::Reasoning];

impl DemoRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The six demos shipped with the engine: two per error-prone slice,
    /// covering the hallucination, toxic-slip, and partial-compliance
    /// failure patterns.
    pub fn shipped() -> Self {
        Self::from_jsonl_str(include_str!("../fixtures/demos_default.jsonl"))
            .expect("shipped demo registry must be valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PromptError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_jsonl_str(&text)
    }

    /// Parse a JSONL registry, one [`DemoBlock`] per non-empty line. Every
    /// `expected_json` must itself parse as a contract-clean pairwise
    /// judgment; a demo that violates the output contract would teach the
    /// judge the wrong format.
    pub fn from_jsonl_str(text: &str) -> Result<Self, PromptError> {
        let mut registry = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let demo: DemoBlock =
                serde_json::from_str(line).map_err(|e| PromptError::RegistryLine {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            match parse_judgment_str(
                &demo.expected_json,
                &ParseOptions::for_mode(&PromptMode::FewShot(0)),
            ) {
                ParseOutcome::Parsed { violations, .. } if violations.is_empty() => {}
                ParseOutcome::Parsed { violations, .. } => {
                    return Err(PromptError::RegistryLine {
                        line: line_no,
                        reason: format!("expected_json has violations: {}", violations.join("; ")),
                    })
                }
                ParseOutcome::Flagged { reason, .. } => {
                    return Err(PromptError::RegistryLine {
                        line: line_no,
                        reason: format!("expected_json rejected: {reason}"),
                    })
                }
            }
            registry.push(demo);
        }
        Ok(registry)
    }

    pub fn push(&mut self, demo: DemoBlock) {
        self.by_slice.entry(demo.slice).or_default().push(demo);
    }

    pub fn count(&self, slice: Slice) -> usize {
        self.by_slice.get(&slice).map_or(0, Vec::len)
    }

    pub fn total(&self) -> usize {
        self.by_slice.values().map(Vec::len).sum()
    }

    /// Select `k` demos round-robin over Chat-Hard → Safety → Reasoning,
    /// ties broken by insertion order. Deterministic given the registry.
    pub fn select(&self, k: usize) -> Result<Vec<&DemoBlock>, PromptError> {
        let mut cursors = [0usize; 3];
        let mut picked = Vec::with_capacity(k);
        for position in 0..k {
            let lane = position % SELECTION_ORDER.len();
            let slice = SELECTION_ORDER[lane];
            let pool = self.by_slice.get(&slice).map_or(&[][..], Vec::as_slice);
            match pool.get(cursors[lane]) {
                Some(demo) => {
                    picked.push(demo);
                    cursors[lane] += 1;
                }
                None => return Err(PromptError::InsufficientDemos { slice, position }),
            }
        }
        Ok(picked)
    }
}

/// Select `k` demos from the registry (see [`DemoRegistry::select`]).
pub fn select_demos(registry: &DemoRegistry, k: usize) -> Result<Vec<&DemoBlock>, PromptError> {
    registry.select(k)
}

/// The full set of prompt templates. Missing files in an override directory
/// fall back to the embedded defaults.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub pairwise_system: String,
    pub pairwise_system_no_rationale: String,
    pub pairwise_user: String,
    pub demo_block: String,
    pub naive_system: String,
    pub longdoc_system: String,
    pub longdoc_user: String,
    pub single_system: String,
    pub single_user: String,
    pub grader_system: String,
    pub grader_user: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            pairwise_system: include_str!("templates/pairwise_system.txt").to_string(),
            pairwise_system_no_rationale: include_str!(
                "templates/pairwise_system_no_rationale.txt"
            )
            .to_string(),
            pairwise_user: include_str!("templates/pairwise_user.txt").to_string(),
            demo_block: include_str!("templates/demo_block.txt").to_string(),
            naive_system: include_str!("templates/naive_system.txt").to_string(),
            longdoc_system: include_str!("templates/longdoc_system.txt").to_string(),
            longdoc_user: include_str!("templates/longdoc_user.txt").to_string(),
            single_system: include_str!("templates/single_system.txt").to_string(),
            single_user: include_str!("templates/single_user.txt").to_string(),
            grader_system: include_str!("templates/grader_system.txt").to_string(),
            grader_user: include_str!("templates/grader_user.txt").to_string(),
        }
    }
}

impl TemplateSet {
    /// Load overrides from a directory of `<name>.txt` files; anything not
    /// present keeps its embedded default.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let mut set = TemplateSet::default();
        let dir = dir.as_ref();
        let load = |name: &str, slot: &mut String| -> Result<(), PromptError> {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(&path).map_err(|e| PromptError::Template {
                    name: name.to_string(),
                    reason: e.to_string(),
                })?;
            }
            Ok(())
        };
        load("pairwise_system", &mut set.pairwise_system)?;
        load(
            "pairwise_system_no_rationale",
            &mut set.pairwise_system_no_rationale,
        )?;
        load("pairwise_user", &mut set.pairwise_user)?;
        load("demo_block", &mut set.demo_block)?;
        load("naive_system", &mut set.naive_system)?;
        load("longdoc_system", &mut set.longdoc_system)?;
        load("longdoc_user", &mut set.longdoc_user)?;
        load("single_system", &mut set.single_system)?;
        load("single_user", &mut set.single_user)?;
        load("grader_system", &mut set.grader_system)?;
        load("grader_user", &mut set.grader_user)?;
        Ok(set)
    }
}

/// Single-pass placeholder substitution. Values are inserted verbatim and
/// never re-scanned, so placeholder-looking text inside an answer or a demo
/// cannot inject further expansion.
fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while !rest.is_empty() {
        let mut earliest: Option<(usize, &str, &str)> = None;
        for &(key, value) in substitutions {
            if let Some(pos) = rest.find(key) {
                if earliest.is_none_or(|(best, _, _)| pos < best) {
                    earliest = Some((pos, key, value));
                }
            }
        }
        match earliest {
            Some((pos, key, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + key.len()..];
            }
            None => {
                out.push_str(rest);
                break 'outer;
            }
        }
    }
    out
}

/// A ready-to-send prompt: deterministic bytes given deterministic inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub system_text: String,
    pub user_text: String,
    /// `estimate_tokens(system_text + user_text)`.
    pub estimated_tokens: usize,
    /// Grouping key for gateway sub-batching; set when prompts share a
    /// document section byte-for-byte.
    pub batch_key: Option<u64>,
}

impl AssembledPrompt {
    fn new(system_text: String, user_text: String, batch_key: Option<u64>) -> Self {
        let mut joined = String::with_capacity(system_text.len() + user_text.len());
        joined.push_str(&system_text);
        joined.push_str(&user_text);
        let estimated_tokens = estimate_tokens(&joined);
        AssembledPrompt {
            system_text,
            user_text,
            estimated_tokens,
            batch_key,
        }
    }
}

/// The material being judged.
#[derive(Debug, Clone, Copy)]
pub enum JudgeTask<'a> {
    Pairwise {
        prompt: &'a str,
        answer_a: &'a str,
        answer_b: &'a str,
    },
    LongDocument {
        document: &'a str,
        question: &'a str,
        answer: &'a str,
    },
}

/// Assembles prompts from a template set. `rationale_field = false` swaps in
/// the system variant that never asks for a rationale (the prompt-ablation
/// knob); everything else is unchanged.
#[derive(Debug, Clone)]
pub struct PromptForge {
    templates: TemplateSet,
    rationale_field: bool,
}

impl Default for PromptForge {
    fn default() -> Self {
        PromptForge {
            templates: TemplateSet::default(),
            rationale_field: true,
        }
    }
}

impl PromptForge {
    pub fn new(templates: TemplateSet) -> Self {
        PromptForge {
            templates,
            rationale_field: true,
        }
    }

    pub fn with_rationale_field(mut self, on: bool) -> Self {
        self.rationale_field = on;
        self
    }

    pub fn rationale_field(&self) -> bool {
        self.rationale_field
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Build the judge prompt for any of the four modes.
    ///
    /// Pure function of its inputs: identical arguments yield identical
    /// bytes, and `few_shot(0)` is byte-identical to `zero_shot`.
    pub fn build_prompt(
        &self,
        mode: &PromptMode,
        task: &JudgeTask<'_>,
        demos: &[&DemoBlock],
        weights: &RubricWeights,
    ) -> Result<AssembledPrompt, PromptError> {
        match (mode, task) {
            (
                PromptMode::ZeroShot | PromptMode::FewShot(_) | PromptMode::Naive,
                JudgeTask::Pairwise {
                    prompt,
                    answer_a,
                    answer_b,
                },
            ) => {
                let expected = match mode {
                    PromptMode::FewShot(k) => *k as usize,
                    _ => 0,
                };
                if demos.len() != expected {
                    return Err(PromptError::DemoCountMismatch {
                        expected,
                        actual: demos.len(),
                    });
                }
                let system = match mode {
                    PromptMode::Naive => self.templates.naive_system.clone(),
                    _ => {
                        let template = if self.rationale_field {
                            &self.templates.pairwise_system
                        } else {
                            &self.templates.pairwise_system_no_rationale
                        };
                        render(
                            template,
                            &[
                                ("{{RUBRIC}}", RubricAxis::priority_line()),
                                ("{{WEIGHTS}}", &weights.summary()),
                            ],
                        )
                    }
                };
                let rendered_demos = self.render_demos(demos);
                let user = render(
                    &self.templates.pairwise_user,
                    &[
                        ("{{DEMOS}}", &rendered_demos),
                        ("{{TASK_PROMPT}}", prompt),
                        ("{{ANSWER_A}}", answer_a),
                        ("{{ANSWER_B}}", answer_b),
                    ],
                );
                Ok(AssembledPrompt::new(system, user, None))
            }
            (
                PromptMode::LongDocument,
                JudgeTask::LongDocument {
                    document,
                    question,
                    answer,
                },
            ) => {
                if !demos.is_empty() {
                    return Err(PromptError::DemoCountMismatch {
                        expected: 0,
                        actual: demos.len(),
                    });
                }
                Ok(self.build_longdoc_prompt(document, question, answer))
            }
            (mode, _) => Err(PromptError::TaskModeMismatch { mode: mode.label() }),
        }
    }

    /// Long-document prompt for one window. The batch key is a hash of the
    /// document bytes so question-answer pairs over the same window group
    /// into gateway sub-batches.
    pub fn build_longdoc_prompt(
        &self,
        document: &str,
        question: &str,
        answer: &str,
    ) -> AssembledPrompt {
        let system = render(
            &self.templates.longdoc_system,
            &[("{{RUBRIC}}", RubricAxis::priority_line())],
        );
        let user = render(
            &self.templates.longdoc_user,
            &[
                ("{{DOCUMENT}}", document),
                ("{{QUESTION}}", question),
                ("{{ANSWER}}", answer),
            ],
        );
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        document.hash(&mut hasher);
        AssembledPrompt::new(system, user, Some(hasher.finish()))
    }

    /// Single-answer scoring prompt (documentless). Shares the long-document
    /// output contract: a JSON object with `score` and `rationale`.
    pub fn build_single_prompt(&self, task_prompt: &str, answer: &str) -> AssembledPrompt {
        let system = render(
            &self.templates.single_system,
            &[("{{RUBRIC}}", RubricAxis::priority_line())],
        );
        let user = render(
            &self.templates.single_user,
            &[("{{TASK_PROMPT}}", task_prompt), ("{{ANSWER}}", answer)],
        );
        AssembledPrompt::new(system, user, None)
    }

    /// Prompt for the rationale-similarity grader: presents both
    /// explanations and demands a bare integer 0–10.
    pub fn build_grader_prompt(
        &self,
        model_rationale: &str,
        human_rationale: &str,
    ) -> AssembledPrompt {
        let user = render(
            &self.templates.grader_user,
            &[
                ("{{MODEL_RATIONALE}}", model_rationale),
                ("{{HUMAN_RATIONALE}}", human_rationale),
            ],
        );
        AssembledPrompt::new(self.templates.grader_system.clone(), user, None)
    }

    fn render_demos(&self, demos: &[&DemoBlock]) -> String {
        let mut out = String::new();
        for (i, demo) in demos.iter().enumerate() {
            let index = (i + 1).to_string();
            out.push_str(&render(
                &self.templates.demo_block,
                &[
                    ("{{INDEX}}", &index),
                    ("{{TASK_PROMPT}}", &demo.prompt),
                    ("{{ANSWER_A}}", &demo.response_a),
                    ("{{ANSWER_B}}", &demo.response_b),
                    ("{{EXPECTED_JSON}}", &demo.expected_json),
                ],
            ));
        }
        out
    }
}
