//! Strict JSON experiment configs. Unknown keys are rejected and every
//! value is validated before any compute starts.

use std::path::Path;

use lopt_core::lopt::{LearnedCfg, MlpLOptCfg};
use lopt_core::metatrain::{MetaTrainCfg, PesCfg, DEFAULT_GRAD_CLIP};
use lopt_core::tasks::{task_by_name, TaskSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Learned-optimizer architecture by preset name, or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnedSpec {
    Mlp {
        #[serde(default = "default_preset")]
        preset: String,
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_depth")]
        depth: usize,
    },
    NnAdam,
    Custom {
        cfg: LearnedCfg,
    },
}

fn default_preset() -> String {
    "small_fc_lopt".into()
}

fn default_hidden() -> usize {
    4
}

fn default_depth() -> usize {
    2
}

impl Default for LearnedSpec {
    fn default() -> Self {
        LearnedSpec::Mlp {
            preset: default_preset(),
            hidden: default_hidden(),
            depth: default_depth(),
        }
    }
}

impl LearnedSpec {
    pub fn resolve(&self) -> Result<LearnedCfg> {
        let cfg = match self {
            LearnedSpec::Mlp { preset, hidden, depth } => LearnedCfg::Mlp(MlpLOptCfg {
                hidden: *hidden,
                depth: *depth,
                ..MlpLOptCfg::with_preset(preset)?
            }),
            LearnedSpec::NnAdam => LearnedCfg::NnAdam,
            LearnedSpec::Custom { cfg } => cfg.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaTrainConfig {
    pub tasks: Vec<String>,
    pub learned: LearnedSpec,
    pub pes: PesCfg,
    pub meta_lr: f64,
    pub meta_steps: u64,
    pub grad_clip: f64,
    pub seed: u64,
    /// Meta-steps between checkpoints; must be a whole number of episodes.
    pub checkpoint_every: u64,
    pub precision: Precision,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        MetaTrainConfig {
            tasks: vec!["synth_mlp".into()],
            learned: LearnedSpec::default(),
            pes: PesCfg::default(),
            meta_lr: 1e-4,
            meta_steps: 20_000,
            grad_clip: DEFAULT_GRAD_CLIP,
            seed: 0,
            checkpoint_every: 1000,
            precision: Precision::F32,
        }
    }
}

impl MetaTrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let cfg: Self = serde_json::from_str(&text).map_err(Error::json(path))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_cfg(&self) -> MetaTrainCfg {
        MetaTrainCfg {
            pes: self.pes,
            meta_lr: self.meta_lr,
            meta_steps: self.meta_steps,
            grad_clip: self.grad_clip,
        }
    }

    pub fn task_specs(&self) -> Result<Vec<TaskSpec>> {
        if self.tasks.is_empty() {
            return Err(Error::Usage("config lists no tasks".into()));
        }
        self.tasks.iter().map(|t| Ok(task_by_name(t)?)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train_cfg().validate()?;
        self.learned.resolve()?;
        self.task_specs()?;
        let per = self.pes.truncations_per_episode();
        if self.checkpoint_every == 0 || !self.checkpoint_every.is_multiple_of(per) {
            return Err(Error::Usage(format!(
                "checkpoint_every ({}) must be a positive multiple of the {per} truncations per episode",
                self.checkpoint_every
            )));
        }
        Ok(())
    }
}

/// SHA-256 of the canonical JSON of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("plain data");
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
