//! Service configuration file and judge construction.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use gavel_backend::{BackendFileConfig, FlagLog, Judge, JudgeConfig, DEFAULT_WINDOW_TOKENS};
use gavel_core::{DemoRegistry, PromptForge, RubricWeights, TemplateSet};
use serde::Deserialize;

use crate::api::ServiceState;

#[derive(Debug, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    /// Single bearer token; omit to serve unauthenticated.
    #[serde(default)]
    pub auth_token: Option<String>,
    /// Long-document window, estimated tokens.
    #[serde(default = "default_window_tokens")]
    pub window_tokens: usize,
    /// Append per-window chunk scores here (JSONL) for reward-dip debugging.
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub flag_log: Option<PathBuf>,
    #[serde(default)]
    pub weights_file: Option<PathBuf>,
    #[serde(default)]
    pub demos_file: Option<PathBuf>,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "default_max_parse_attempts")]
    pub max_parse_attempts: u32,
    #[serde(default)]
    pub lenient_fences: bool,
    pub backend: BackendFileConfig,
}

fn default_port() -> u16 {
    8080
}

fn default_window_tokens() -> usize {
    DEFAULT_WINDOW_TOKENS
}

fn default_max_parse_attempts() -> u32 {
    3
}

impl ServiceConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Build the judge and service state. Relative paths resolve against
    /// `base_dir` (the config file's directory).
    pub fn build_state(self, base_dir: &Path) -> Result<Arc<ServiceState>> {
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let gateway = self
            .backend
            .build_gateway(base_dir)
            .context("building the backend gateway")?;
        let weights = match self.weights_file {
            Some(p) => RubricWeights::from_toml_file(resolve(p))?,
            None => RubricWeights::human_derived(),
        };
        let registry = match self.demos_file {
            Some(p) => DemoRegistry::from_path(resolve(p))?,
            None => DemoRegistry::shipped(),
        };
        let templates = match self.templates_dir {
            Some(p) => TemplateSet::from_dir(resolve(p))?,
            None => TemplateSet::default(),
        };
        let mut judge = Judge::new(
            gateway,
            PromptForge::new(templates),
            registry,
            weights,
            JudgeConfig {
                max_parse_attempts: self.max_parse_attempts,
                lenient_fences: self.lenient_fences,
                ..JudgeConfig::default()
            },
        )?;
        if let Some(p) = self.flag_log {
            judge = judge.with_flag_log(FlagLog::new(resolve(p)));
        }
        let state = ServiceState::new(judge, self.window_tokens)
            .with_auth_token(self.auth_token)
            .with_trace_path(self.trace_path.map(resolve));
        Ok(Arc::new(state))
    }
}
