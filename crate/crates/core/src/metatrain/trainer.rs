use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::pes::{pes_init, pes_truncation_step, PesCfg, PesState, UnrollProblem};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const META_LR_GRID: [f64; 3] = [3e-5, 1e-4, 3e-4];
pub const DEFAULT_GRAD_CLIP: f64 = 3.0;

/// Clamps every coordinate to `[-bound, bound]`.
pub fn clip_elementwise(v: &[f64], bound: f64) -> Vec<f64> {
    v.iter().map(|x| x.max(-bound).min(bound)).collect()
}

/// Adam over the flat meta-parameters with `beta1 = 0.9`, `beta2 = 0.999`,
/// `eps = 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaAdam {
    pub lr: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl MetaAdam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(lr: f64, len: usize) -> Self {
        MetaAdam {
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Float::powi(Self::BETA1, self.t as i32);
        let bc2 = 1.0 - Float::powi(Self::BETA2, self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            theta[i] -= self.lr * (self.m[i] / bc1) / (Float::sqrt(self.v[i] / bc2) + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaTrainCfg {
    pub pes: PesCfg,
    pub meta_lr: f64,
    pub meta_steps: u64,
    pub grad_clip: f64,
}

impl MetaTrainCfg {
    pub fn validate(&self) -> Result<()> {
        self.pes.validate()?;
        if !(self.meta_lr >= 0.0 && self.meta_lr.is_finite()) {
            return Err(Error::InvalidConfig("meta learning rate must be >= 0".into()));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(Error::InvalidConfig("gradient clip bound must be > 0".into()));
        }
        Ok(())
    }
}

/// Everything needed to continue meta-training from an episode boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub meta_step: u64,
    pub theta: Vec<f64>,
    pub adam: MetaAdam,
}

/// One line of the meta-training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub meta_step: u64,
    pub pair_mean_loss: f64,
    /// L2 norm of the estimate before clipping.
    pub gnorm: f64,
    /// Fraction of coordinates the clip changed.
    pub clip_frac: f64,
}

/// PES estimate, elementwise clip, meta-Adam step; repeated.
pub struct MetaTrainer<'a, P: UnrollProblem> {
    problem: &'a P,
    cfg: MetaTrainCfg,
    rng: Rng,
    state: TrainState,
    pes: PesState<P::Inner>,
}

impl<'a, P: UnrollProblem> MetaTrainer<'a, P> {
    pub fn new(problem: &'a P, cfg: MetaTrainCfg, theta: Vec<f64>, rng: Rng) -> Result<Self> {
        let adam = MetaAdam::new(cfg.meta_lr, theta.len());
        Self::resume(
            problem,
            cfg,
            TrainState {
                meta_step: 0,
                theta,
                adam,
            },
            rng,
        )
    }

    /// Continues from a saved state, which must sit on an episode boundary.
    pub fn resume(problem: &'a P, cfg: MetaTrainCfg, state: TrainState, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        if state.theta.len() != problem.theta_len() {
            return Err(Error::ThetaLength {
                expected: problem.theta_len(),
                got: state.theta.len(),
            });
        }
        let per = cfg.pes.truncations_per_episode();
        if !state.meta_step.is_multiple_of(per) {
            return Err(Error::InvalidConfig(alloc::format!(
                "can only resume at an episode boundary (multiple of {per} meta-steps), got {}",
                state.meta_step
            )));
        }
        let pes = pes_init(problem, &cfg.pes, &rng, state.meta_step / per);
        Ok(MetaTrainer {
            problem,
            cfg,
            rng,
            state,
            pes,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn theta(&self) -> &[f64] {
        &self.state.theta
    }

    pub fn meta_step(&self) -> u64 {
        self.state.meta_step
    }

    pub fn at_episode_boundary(&self) -> bool {
        self.pes.t == 0
    }

    pub fn done(&self) -> bool {
        self.state.meta_step >= self.cfg.meta_steps
    }

    pub fn step(&mut self) -> Result<EpisodeRecord> {
        let out = pes_truncation_step(
            self.problem,
            &mut self.pes,
            &self.state.theta,
            &self.cfg.pes,
            &self.rng,
            self.state.meta_step,
            None,
        )?;
        let gnorm = Float::sqrt(out.grad.iter().map(|g| g * g).sum::<f64>());
        let clipped = clip_elementwise(&out.grad, self.cfg.grad_clip);
        let changed = clipped.iter().zip(&out.grad).filter(|(a, b)| a != b).count();
        self.state.adam.step(&mut self.state.theta, &clipped);
        let rec = EpisodeRecord {
            meta_step: self.state.meta_step,
            pair_mean_loss: out.mean_loss,
            gnorm,
            clip_frac: changed as f64 / out.grad.len().max(1) as f64,
        };
        self.state.meta_step += 1;
        Ok(rec)
    }
}
