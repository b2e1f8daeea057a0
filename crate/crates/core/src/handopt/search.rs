use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamCfg, NAdamW, NAdamWCfg, Sgd, SgdCfg, Sgdm, SgdmCfg};
use crate::error::{Error, Result};
use crate::eval::evaluate_optimizer;
use crate::optimizer::AnyOptimizer;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tasks::TaskSpec;

/// Half-decade learning rates from `1e-7` to `1`: 15 values, ascending.
pub fn lr_grid() -> Vec<f64> {
    (0..15).map(|k| Float::powf(10.0, -7.0 + 0.5 * k as f64)).collect()
}

/// Draws one configuration from the NAdamW search space.
pub fn sample_nadamw(rng: &Rng) -> NAdamWCfg {
    let mut s = rng.stream();
    let lr_base = s.log_uniform(1e-5, 1.0);
    let beta1 = 1.0 - s.log_uniform(1e-3, 1.0);
    let beta2 = 1.0 - s.log_uniform(1e-5, 1.0);
    let eps = s.log_uniform(1e-8, 1e4);
    let use_nesterov = s.bernoulli(0.5);
    let mut l2_wd = s.log_uniform(1e-5, 1e-1);
    let mut l2_adamw = s.log_uniform(1e-5, 1e-1);
    match s.below(3) {
        0 => {}
        1 => l2_wd = 0.0,
        _ => l2_adamw = 0.0,
    }
    let c_min_lr_mult = if s.bernoulli(0.5) {
        0.0
    } else {
        s.log_uniform(1e-5, 1.0)
    };
    let c_warmup = if s.bernoulli(0.5) {
        0.0
    } else {
        s.log_uniform(1e-5, 1e-1)
    };
    let c_constant = s.uniform();
    NAdamWCfg {
        lr_base,
        beta1,
        beta2,
        eps,
        l2_wd,
        l2_adamw,
        use_nesterov,
        c_warmup,
        c_constant,
        c_min_lr_mult,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sgd,
    Sgdm,
    Adam,
    Nadamw,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Sgd, Family::Sgdm, Family::Adam, Family::Nadamw];

    pub fn parse(name: &str) -> Option<Family> {
        match name {
            "sgd" => Some(Family::Sgd),
            "sgdm" => Some(Family::Sgdm),
            "adam" => Some(Family::Adam),
            "nadamw" => Some(Family::Nadamw),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Sgd => "sgd",
            Family::Sgdm => "sgdm",
            Family::Adam => "adam",
            Family::Nadamw => "nadamw",
        }
    }
}

/// A concrete hand-designed optimizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HandConfig {
    Sgd(SgdCfg),
    Sgdm(SgdmCfg),
    Adam(AdamCfg),
    Nadamw(NAdamWCfg),
}

impl HandConfig {
    pub fn optimizer<S: Scalar>(&self, total_steps: u64) -> AnyOptimizer<S> {
        match *self {
            HandConfig::Sgd(c) => AnyOptimizer::Sgd(Sgd(c)),
            HandConfig::Sgdm(c) => AnyOptimizer::Sgdm(Sgdm(c)),
            HandConfig::Adam(c) => AnyOptimizer::Adam(Adam(c)),
            HandConfig::Nadamw(cfg) => AnyOptimizer::NAdamW(NAdamW { cfg, total_steps }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HandConfig::Sgd(c) => c.validate(),
            HandConfig::Sgdm(c) => c.validate(),
            HandConfig::Adam(c) => c.validate(),
            HandConfig::Nadamw(c) => c.validate(),
        }
    }
}

pub const SGDM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchCfg {
    pub budget: usize,
    pub inner_steps: u64,
    /// Task seeds per trial, shared by every trial.
    pub seeds_per_trial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub seed: u64,
    pub config: HandConfig,
    pub mean_loss: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Trial,
    /// Task seeds every trial was scored on.
    pub seeds: Vec<u64>,
    pub trials: Vec<Trial>,
    /// Every trial diverged; `best` then scores the clip value.
    pub all_diverged: bool,
}

impl SearchResult {
    /// Best score among the first `k` trials, for `k = 1..=trials.len()`.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                best = best.min(t.mean_loss);
                best
            })
            .collect()
    }
}

fn candidate_configs(family: Family, budget: usize, rng: &Rng) -> Vec<HandConfig> {
    let grid = lr_grid();
    let lrs: Vec<f64> = if budget >= grid.len() {
        grid
    } else {
        let mut s = rng.stream();
        let mut idx: Vec<usize> = (0..grid.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, s.below(i + 1));
        }
        idx[..budget].iter().map(|&i| grid[i]).collect()
    };
    match family {
        Family::Sgd => lrs.into_iter().map(|lr| HandConfig::Sgd(SgdCfg { lr })).collect(),
        Family::Sgdm => lrs
            .into_iter()
            .map(|lr| {
                HandConfig::Sgdm(SgdmCfg {
                    lr,
                    momentum: SGDM_MOMENTUM,
                })
            })
            .collect(),
        Family::Adam => lrs
            .into_iter()
            .map(|lr| {
                HandConfig::Adam(AdamCfg {
                    lr,
                    ..AdamCfg::default()
                })
            })
            .collect(),
        Family::Nadamw => (0..budget as u64)
            .map(|i| HandConfig::Nadamw(sample_nadamw(&rng.fold_in(i))))
            .collect(),
    }
}

/// Scores `budget` configurations by mean clipped training loss over
/// `inner_steps` and returns the best along with every trial, in trial order.
/// Grid families evaluate at most the 15 grid points.
pub fn random_search<S: Scalar>(task: &TaskSpec, family: Family, cfg: &SearchCfg, rng: &Rng) -> Result<SearchResult> {
    if cfg.budget == 0 || cfg.inner_steps == 0 || cfg.seeds_per_trial == 0 {
        return Err(Error::InvalidConfig(
            "budget, inner_steps and seeds_per_trial must be >= 1".into(),
        ));
    }
    let mut seed_stream = rng.fold_in(0).stream();
    let seeds: Vec<u64> = (0..cfg.seeds_per_trial).map(|_| seed_stream.next_u64() >> 1).collect();
    let configs = candidate_configs(family, cfg.budget, &rng.fold_in(1));
    let trials: Vec<Trial> = crate::par::map_indexed(configs.len(), |i| {
        let opt = configs[i].optimizer::<S>(cfg.inner_steps);
        let res = evaluate_optimizer(&opt, task, cfg.inner_steps, &seeds);
        Trial {
            trial: i,
            seed: seeds[0],
            config: configs[i],
            mean_loss: res.mean,
            diverged: res.any_diverged(),
        }
    });
    let best = trials
        .iter()
        .fold(None::<&Trial>, |acc, t| match acc {
            Some(b) if b.mean_loss <= t.mean_loss => Some(b),
            _ => Some(t),
        })
        .cloned()
        .expect("budget >= 1");
    let all_diverged = trials.iter().all(|t| t.diverged);
    Ok(SearchResult {
        best,
        seeds,
        trials,
        all_diverged,
    })
}
