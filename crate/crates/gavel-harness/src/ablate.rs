//! Ablation driver: vary exactly one prompt-design knob at a time and
//! report each variant side by side with percentage-point deltas against
//! the first variant.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gavel_core::{PromptMode, RubricWeights, Slice};
use serde::Serialize;
use thiserror::Error;

use crate::bench::{run_benchmark, BenchError};
use crate::dataset::PreferenceRecord;
use crate::report::{SliceReport, CSV_HEADER};
use crate::setup::JudgeSetup;

/// The knob being swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    /// Structured prompt vs the bare "which answer is better?" prompt.
    Prompt,
    /// In-context demonstration count sweep.
    Demos,
    /// Human-derived vs uniform axis weights.
    Weights,
    /// Rationale field requested vs omitted.
    Rationale,
}

impl FromStr for AblationAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prompt" => Ok(AblationAxis::Prompt),
            "demos" => Ok(AblationAxis::Demos),
            "weights" => Ok(AblationAxis::Weights),
            "rationale" => Ok(AblationAxis::Rationale),
            other => Err(format!("unknown ablation axis: {other}")),
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AblationAxis::Prompt => "prompt",
            AblationAxis::Demos => "demos",
            AblationAxis::Weights => "weights",
            AblationAxis::Rationale => "rationale",
        };
        f.write_str(name)
    }
}

/// Default demonstration sweep.
pub const DEFAULT_DEMO_SWEEP: [u32; 4] = [0, 2, 4, 6];

#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub axis: AblationAxis,
    /// Mode held fixed while the axis varies (the Demos axis derives its
    /// own modes from `demo_counts`).
    pub base_mode: PromptMode,
    /// Demo-count sweep, ascending.
    pub demo_counts: Vec<u32>,
}

impl AblationPlan {
    pub fn new(axis: AblationAxis, base_mode: PromptMode) -> Self {
        AblationPlan {
            axis,
            base_mode,
            demo_counts: DEFAULT_DEMO_SWEEP.to_vec(),
        }
    }

    pub fn with_demo_counts(mut self, counts: Vec<u32>) -> Self {
        self.demo_counts = counts;
        self
    }

    pub fn validate(&self) -> Result<(), AblationError> {
        if self.axis == AblationAxis::Demos {
            if self.demo_counts.is_empty() {
                return Err(AblationError::EmptyPlan);
            }
            if self.demo_counts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(AblationError::UnsortedDemoCounts);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("ablation plan names no variants")]
    EmptyPlan,
    #[error("demo counts must be strictly ascending")]
    UnsortedDemoCounts,
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Judge(#[from] gavel_backend::JudgeError),
}

/// A variant either produced a report or was not applicable under the base
/// mode (the weight scheme needs subscores, which only few-shot judging
/// elicits).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VariantResult {
    Report(SliceReport),
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub label: String,
    #[serde(flatten)]
    pub result: VariantResult,
    /// Percentage points vs the first variant; absent on the baseline row
    /// and on not-applicable rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_overall_pp: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub delta_slices_pp: BTreeMap<Slice, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationOutcome {
    pub axis: String,
    pub variants: Vec<VariantReport>,
}

/// Run every variant of the plan over the dataset, all other settings held
/// fixed, and attach pp-deltas against the first variant.
pub async fn run_ablation(
    plan: &AblationPlan,
    dataset: &[PreferenceRecord],
    setup: &JudgeSetup,
) -> Result<AblationOutcome, AblationError> {
    plan.validate()?;

    struct Variant {
        label: String,
        mode: PromptMode,
        rationale_field: bool,
        weights: RubricWeights,
        applicable: Option<String>,
    }

    let base_weights = setup.weights;
    let variants: Vec<Variant> = match plan.axis {
        AblationAxis::Prompt => vec![
            Variant {
                label: "good".into(),
                mode: plan.base_mode,
                rationale_field: true,
                weights: base_weights,
                applicable: None,
            },
            Variant {
                label: "naive".into(),
                mode: PromptMode::Naive,
                rationale_field: true,
                weights: base_weights,
                applicable: None,
            },
        ],
        AblationAxis::Demos => plan
            .demo_counts
            .iter()
            .map(|&k| Variant {
                label: format!("K={k}"),
                mode: PromptMode::FewShot(k),
                rationale_field: true,
                weights: base_weights,
                applicable: None,
            })
            .collect(),
        AblationAxis::Weights => {
            let not_applicable = match plan.base_mode {
                PromptMode::FewShot(k) if k > 0 => None,
                mode => Some(format!("judge emits no subscores in {} mode", mode.label())),
            };
            vec![
                Variant {
                    label: "human_derived".into(),
                    mode: plan.base_mode,
                    rationale_field: true,
                    weights: RubricWeights::human_derived(),
                    applicable: not_applicable.clone(),
                },
                Variant {
                    label: "uniform".into(),
                    mode: plan.base_mode,
                    rationale_field: true,
                    weights: RubricWeights::uniform(),
                    applicable: not_applicable,
                },
            ]
        }
        AblationAxis::Rationale => vec![
            Variant {
                label: "rationale_on".into(),
                mode: plan.base_mode,
                rationale_field: true,
                weights: base_weights,
                applicable: None,
            },
            Variant {
                label: "rationale_off".into(),
                mode: plan.base_mode,
                rationale_field: false,
                weights: base_weights,
                applicable: None,
            },
        ],
    };

    let mut reports: Vec<VariantReport> = Vec::with_capacity(variants.len());
    let mut baseline: Option<SliceReport> = None;
    for variant in variants {
        if let Some(reason) = variant.applicable {
            reports.push(VariantReport {
                label: variant.label,
                result: VariantResult::NotApplicable { reason },
                delta_overall_pp: None,
                delta_slices_pp: BTreeMap::new(),
            });
            continue;
        }
        let judge = setup.judge_variant(variant.rationale_field, variant.weights)?;
        let outcome = run_benchmark(dataset, &variant.mode, &judge, None).await?;
        let (delta_overall_pp, delta_slices_pp) = match &baseline {
            None => {
                baseline = Some(outcome.report.clone());
                (None, BTreeMap::new())
            }
            Some(base) => {
                let overall = (outcome.report.overall.accuracy - base.overall.accuracy) * 100.0;
                let slices = outcome
                    .report
                    .slices
                    .iter()
                    .filter_map(|(slice, tally)| {
                        base.slices
                            .get(slice)
                            .map(|b| (*slice, (tally.accuracy - b.accuracy) * 100.0))
                    })
                    .collect();
                (Some(overall), slices)
            }
        };
        reports.push(VariantReport {
            label: variant.label,
            result: VariantResult::Report(outcome.report),
            delta_overall_pp,
            delta_slices_pp,
        });
    }

    Ok(AblationOutcome {
        axis: plan.axis.to_string(),
        variants: reports,
    })
}

/// Ablation CSV: one row per variant with pp-delta columns appended.
pub fn ablation_csv(outcome: &AblationOutcome) -> String {
    let mut text = String::new();
    text.push_str(CSV_HEADER);
    text.push_str(",Δ Overall (pp),Δ Chat (pp),Δ Chat-Hard (pp),Δ Safety (pp),Δ Reasoning (pp)\n");
    for variant in &outcome.variants {
        match &variant.result {
            VariantResult::NotApplicable { reason } => {
                text.push_str(&format!("{},n/a ({reason}),,,,,,,,,,\n", variant.label));
            }
            VariantResult::Report(report) => {
                text.push_str(&crate::report::csv_row(&variant.label, report));
                match variant.delta_overall_pp {
                    None => text.push_str(",-,-,-,-,-"),
                    Some(overall) => {
                        text.push_str(&format!(",{overall:+.1}"));
                        for slice in Slice::ALL {
                            match variant.delta_slices_pp.get(&slice) {
                                Some(d) => text.push_str(&format!(",{d:+.1}")),
                                None => text.push_str(",-"),
                            }
                        }
                    }
                }
                text.push('\n');
            }
        }
    }
    text
}
