//! Pipeline configuration: a JSON document with one section per agent.

use std::path::{Path, PathBuf};

use pinnforge_core::codegen::{Target, DEFAULT_VERIFY_THRESHOLD};
use pinnforge_core::feedback::FeedbackConfig;
use pinnforge_core::pinn::{FeatureCoefficients, MatchWeights, Registry, SelectionConfig};
use pinnforge_core::provider::CompletionParams;
use pinnforge_core::semantic::BaselineWeights;
use pinnforge_core::trainer::{Activation, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::formats::{read_json, FormatError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeAgentConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub params: CompletionParams,
    pub semantic: BaselineWeights,
    /// Score with the HTTP embedding backend instead of the baseline.
    pub embeddings: bool,
}

impl Default for PdeAgentConfig {
    fn default() -> Self {
        PdeAgentConfig {
            k: 5,
            alpha: 0.6,
            params: CompletionParams::default(),
            semantic: BaselineWeights::default(),
            embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinnAgentConfig {
    #[serde(rename = "W")]
    pub w: MatchWeights,
    pub reuse_threshold: f64,
    pub features: FeatureCoefficients,
    /// Capability table override (JSON array of `{name, per, geo, ms}`).
    pub registry: Option<PathBuf>,
    /// History cache (JSONL); `None` disables reuse and recording.
    pub history: Option<PathBuf>,
    /// Learning rate of the capability update from realized scores; 0 disables it.
    pub refine_rate: f64,
}

impl Default for PinnAgentConfig {
    fn default() -> Self {
        let s = SelectionConfig::default();
        PinnAgentConfig {
            w: s.weights,
            reuse_threshold: s.reuse_threshold,
            features: s.features,
            registry: None,
            history: None,
            refine_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSource {
    /// Render the shipped templates.
    Template,
    /// Ask the completion provider for every module.
    Provider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeAgentConfig {
    pub source: CodeSource,
    pub target: Target,
    pub verify_threshold: f64,
    pub params: CompletionParams,
}

impl Default for CodeAgentConfig {
    fn default() -> Self {
        CodeAgentConfig {
            source: CodeSource::Template,
            target: Target::Builtin,
            verify_threshold: DEFAULT_VERIFY_THRESHOLD,
            params: CompletionParams {
                temperature: 0.0,
                ..CompletionParams::default()
            },
        }
    }
}

// `deny_unknown_fields` does not combine with `flatten`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerSection {
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Parameter count treated as the largest model when normalizing complexity,
    /// given as a `depth x width` reference net.
    pub reference_depth: usize,
    pub reference_width: usize,
}

impl Default for TrainerSection {
    fn default() -> Self {
        TrainerSection {
            depth: 3,
            width: 32,
            activation: Activation::Tanh,
            train: TrainConfig::default(),
            reference_depth: 4,
            reference_width: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    pub max_refinements: usize,
    pub hard_cap: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_refinements: 3,
            hard_cap: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pde_agent: PdeAgentConfig,
    pub pinn_agent: PinnAgentConfig,
    pub code_agent: CodeAgentConfig,
    pub trainer: TrainerSection,
    pub feedback: FeedbackConfig,
    pub caps: Caps,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            weights: self.pinn_agent.w,
            reuse_threshold: self.pinn_agent.reuse_threshold,
            alpha: self.pde_agent.alpha,
            features: self.pinn_agent.features,
        }
    }

    pub fn registry(&self) -> Result<Registry, ConfigError> {
        let reg = match &self.pinn_agent.registry {
            Some(p) => read_json(p)?,
            None => Registry::default(),
        };
        reg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.pde_agent.k == 0 {
            return bad("pde_agent.K must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.pde_agent.alpha) {
            return bad(format!("pde_agent.alpha {} outside [0, 1]", self.pde_agent.alpha));
        }
        self.pinn_agent.w.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.pinn_agent.reuse_threshold) {
            return bad("pinn_agent.reuse_threshold outside [0, 1]".into());
        }
        if !(self.code_agent.verify_threshold > 0.0 && self.code_agent.verify_threshold <= 1.0) {
            return bad("code_agent.verify_threshold outside (0, 1]".into());
        }
        if self.trainer.depth == 0 || self.trainer.width == 0 {
            return bad("trainer depth and width must be positive".into());
        }
        self.trainer.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let f = &self.feedback;
        let w = f.weights;
        if w.iter().any(|x| x.is_nan() || *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("feedback.weights must be nonnegative and sum to 1".into());
        }
        if !(0.0..=1.0).contains(&f.alpha_rob) || !positive(f.tau) || !positive(f.eps) || f.kappa.is_nan() || f.kappa < f.eps {
            return bad("feedback: need tau > 0, 0 < eps <= kappa, alpha_rob in [0, 1]".into());
        }
        if self.caps.hard_cap == 0 {
            return bad("caps.hard_cap must be positive".into());
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}
