use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// An inner problem whose truncated unrolls are scored by a scalar
/// meta-objective of the meta-parameters.
pub trait UnrollProblem: Sync {
    type Inner: Clone + Send + Sync;

    fn theta_len(&self) -> usize;

    /// Fresh inner state for task instance `index` of an episode, seeded by
    /// `task_seed`.
    fn init_inner(&self, index: usize, task_seed: u64) -> Self::Inner;

    /// Advances `inner` by `steps` steps under `theta` and returns the
    /// clipped meta-objective over those steps.
    fn unroll(&self, theta: &[f64], inner: &mut Self::Inner, steps: u64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PesCfg {
    /// Antithetic pairs per task instance.
    pub pairs_per_task: usize,
    /// Task instances per meta-gradient.
    pub meta_batch: usize,
    pub sigma: f64,
    /// Truncation length K.
    pub trunc_len: u64,
    /// Episode length T.
    pub episode_len: u64,
}

impl Default for PesCfg {
    fn default() -> Self {
        PesCfg {
            pairs_per_task: 1,
            meta_batch: 32,
            sigma: 0.01,
            trunc_len: 20,
            episode_len: 2000,
        }
    }
}

impl PesCfg {
    pub fn num_pairs(&self) -> usize {
        self.pairs_per_task * self.meta_batch
    }

    pub fn truncations_per_episode(&self) -> u64 {
        self.episode_len / self.trunc_len
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_pairs() == 0 {
            return bad("PES needs at least one pair");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("PES sigma must be positive");
        }
        if self.trunc_len == 0 || !self.episode_len.is_multiple_of(self.trunc_len) {
            return bad("truncation length must divide episode length");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PesPair<I> {
    /// Sum of the perturbations applied since the episode started.
    pub xi: Vec<f64>,
    pub pos: I,
    pub neg: I,
    pub task_index: usize,
    pub task_seed: u64,
}

/// Every pair's state; all pairs share the episode position `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PesState<I> {
    pub pairs: Vec<PesPair<I>>,
    pub t: u64,
    pub episode: u64,
}

/// Output of one truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct PesStep {
    pub grad: Vec<f64>,
    /// Mean over pairs of `(L+ + L-) / 2`.
    pub mean_loss: f64,
    /// `(L+, L-)` per pair in pair order.
    pub losses: Vec<(f64, f64)>,
    /// An episode finished and every pair was reset.
    pub reset: bool,
}

const TASK_DOMAIN: u64 = 0x7A5C;
const NOISE_DOMAIN: u64 = 0x0E95;

/// Starts episode `episode`: pairs for the same task index share the task
/// seed, so every pair for a task sees the same instance and batches.
pub fn pes_init<P: UnrollProblem>(problem: &P, cfg: &PesCfg, rng: &Rng, episode: u64) -> PesState<P::Inner> {
    let key = rng.fold_in(TASK_DOMAIN).fold_in(episode);
    let mut pairs = Vec::with_capacity(cfg.num_pairs());
    for b in 0..cfg.meta_batch {
        let task_seed = key.fold_in(b as u64).stream().next_u64() >> 1;
        let inner = problem.init_inner(b, task_seed);
        for _ in 0..cfg.pairs_per_task {
            pairs.push(PesPair {
                xi: vec![0.0; problem.theta_len()],
                pos: inner.clone(),
                neg: inner.clone(),
                task_index: b,
                task_seed,
            });
        }
    }
    PesState { pairs, t: 0, episode }
}

/// Perturbation for pair `i` at truncation `step`.
pub fn pes_noise(rng: &Rng, step: u64, pair: usize, len: usize, sigma: f64) -> Vec<f64> {
    let mut s = rng.fold_in(NOISE_DOMAIN).fold_in(step).fold_in(pair as u64).stream();
    (0..len).map(|_| sigma * s.normal()).collect()
}

/// One PES truncation: each pair unrolls `trunc_len` steps at
/// `theta + eps` and `theta - eps`, folds `eps` into its running `xi`, and
/// contributes `xi * (L+ - L-) / (2 sigma^2)`. The estimate is the mean over
/// pairs, reduced in pair order. When the episode ends every pair is reset.
///
/// `noise` overrides the sampled perturbation for pair `i`; pass `None` for
/// normal operation.
pub fn pes_truncation_step<P: UnrollProblem>(
    problem: &P,
    state: &mut PesState<P::Inner>,
    theta: &[f64],
    cfg: &PesCfg,
    rng: &Rng,
    step: u64,
    noise: Option<&(dyn Fn(usize) -> Vec<f64> + Sync)>,
) -> Result<PesStep> {
    if theta.len() != problem.theta_len() {
        return Err(Error::ThetaLength {
            expected: problem.theta_len(),
            got: theta.len(),
        });
    }
    let k = cfg.trunc_len;
    let sigma2 = cfg.sigma * cfg.sigma;
    let pairs = core::mem::take(&mut state.pairs);
    let results: Vec<(PesPair<P::Inner>, f64, f64)> = crate::par::map_indexed(pairs.len(), |i| {
        let mut pair = pairs[i].clone();
        let eps = match noise {
            Some(f) => f(i),
            None => pes_noise(rng, step, i, theta.len(), cfg.sigma),
        };
        let plus: Vec<f64> = theta.iter().zip(&eps).map(|(t, e)| t + e).collect();
        let minus: Vec<f64> = theta.iter().zip(&eps).map(|(t, e)| t - e).collect();
        let lp = problem.unroll(&plus, &mut pair.pos, k);
        let lm = problem.unroll(&minus, &mut pair.neg, k);
        for (x, e) in pair.xi.iter_mut().zip(&eps) {
            *x += e;
        }
        (pair, lp, lm)
    });
    drop(pairs);
    let n = results.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let mut mean_loss = 0.0;
    let mut losses = Vec::with_capacity(results.len());
    for (pair, lp, lm) in &results {
        let w = (lp - lm) / (2.0 * sigma2);
        for (g, x) in grad.iter_mut().zip(&pair.xi) {
            *g += w * x;
        }
        mean_loss += 0.5 * (lp + lm);
        losses.push((*lp, *lm));
    }
    grad.iter_mut().for_each(|g| *g /= n);
    state.pairs = results.into_iter().map(|(p, _, _)| p).collect();
    state.t += k;
    let reset = state.t >= cfg.episode_len;
    if reset {
        *state = pes_init(problem, cfg, rng, state.episode + 1);
    }
    Ok(PesStep {
        grad,
        mean_loss: mean_loss / n,
        losses,
        reset,
    })
}
