//! Shared construction of judge pipelines for the CLI and the ablation
//! driver, which needs variant judges (different weights or templates) over
//! one gateway so the in-flight budget stays global.

use std::path::PathBuf;

use gavel_backend::{FlagLog, Gateway, Judge, JudgeConfig, JudgeError};
use gavel_core::{DemoRegistry, PromptForge, RubricWeights, TemplateSet};

#[derive(Clone)]
pub struct JudgeSetup {
    pub gateway: Gateway,
    pub templates: TemplateSet,
    pub registry: DemoRegistry,
    pub weights: RubricWeights,
    pub config: JudgeConfig,
    pub flag_log: Option<PathBuf>,
}

impl JudgeSetup {
    pub fn new(gateway: Gateway) -> Self {
        JudgeSetup {
            gateway,
            templates: TemplateSet::default(),
            registry: DemoRegistry::shipped(),
            weights: RubricWeights::human_derived(),
            config: JudgeConfig::default(),
            flag_log: None,
        }
    }

    pub fn judge(&self) -> Result<Judge, JudgeError> {
        self.judge_variant(true, self.weights)
    }

    /// A judge with this setup's gateway but a variant template/weight
    /// combination.
    pub fn judge_variant(
        &self,
        rationale_field: bool,
        weights: RubricWeights,
    ) -> Result<Judge, JudgeError> {
        let forge = PromptForge::new(self.templates.clone()).with_rationale_field(rationale_field);
        let mut judge = Judge::new(
            self.gateway.clone(),
            forge,
            self.registry.clone(),
            weights,
            self.config.clone(),
        )?;
        if let Some(path) = &self.flag_log {
            judge = judge.with_flag_log(FlagLog::new(path));
        }
        Ok(judge)
    }
}
