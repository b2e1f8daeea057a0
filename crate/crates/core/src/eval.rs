//! Inner training loops and the clipped mean-loss meta-objective.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::optimizer::Optimizer;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tasks::TaskSpec;
use crate::tree::ParamTree;

/// Mean of `min(loss, clip)`; non-finite losses count as `clip`.
pub fn meta_objective(losses: &[f64], clip: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyLosses);
    }
    let sum: f64 = losses
        .iter()
        .map(|&l| if l.is_finite() { l.min(clip) } else { clip })
        .sum();
    Ok(sum / losses.len() as f64)
}

/// Domain separator for the initializer key of a task instance.
const INIT_DOMAIN: u64 = 1;

/// Fresh task instance for `seed`: the reseeded task and its initial
/// parameters. Both members of a PES pair and every optimizer evaluated on
/// the same seed see identical instances.
pub fn task_instance<S: Scalar>(task: &TaskSpec, seed: u64) -> (TaskSpec, ParamTree<S>) {
    let inst = task.with_seed(seed);
    let params = inst.init_params(&Rng::new(seed).fold_in(INIT_DOMAIN));
    (inst, params)
}

/// Runs `steps` inner steps starting at batch index `start`, returning the
/// loss recorded before each update. After the first non-finite loss or
/// update failure the remaining entries are NaN and training stops.
pub fn unroll<S: Scalar, O: Optimizer<S>>(
    opt: &O,
    task: &TaskSpec,
    params: &mut ParamTree<S>,
    state: &mut O::State,
    start: u64,
    steps: u64,
) -> Vec<f64> {
    let mut losses = Vec::with_capacity(steps as usize);
    for k in 0..steps {
        let batch = task.next_batch::<S>(start + k);
        let (loss, grads) = task.loss_and_grad(params, &batch);
        let loss = loss.as_f64();
        if !loss.is_finite() || opt.update(params, &grads, state).is_err() {
            losses.resize(steps as usize, f64::NAN);
            break;
        }
        losses.push(loss);
    }
    losses
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub seeds: Vec<u64>,
    /// Loss curve per seed (NaN after divergence).
    pub curves: Vec<Vec<f64>>,
    /// Clipped meta-objective per seed.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub clip: f64,
}

impl EvalResult {
    pub fn any_diverged(&self) -> bool {
        self.curves.iter().any(|c| c.iter().any(|l| !l.is_finite()))
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, Float::sqrt(var))
}

/// Trains a fresh instance per seed for `steps` steps and scores each run
/// with the clipped meta-objective.
pub fn evaluate_optimizer<S: Scalar, O: Optimizer<S>>(
    opt: &O,
    task: &TaskSpec,
    steps: u64,
    seeds: &[u64],
) -> EvalResult {
    let clip = task.clip_value();
    let curves: Vec<Vec<f64>> = crate::par::map_indexed(seeds.len(), |i| {
        let (inst, mut params) = task_instance::<S>(task, seeds[i]);
        let mut state = opt.init(&params);
        unroll(opt, &inst, &mut params, &mut state, 0, steps)
    });
    let per_seed: Vec<f64> = curves.iter().map(|c| meta_objective(c, clip).unwrap_or(clip)).collect();
    let (mean, std) = mean_std(&per_seed);
    EvalResult {
        seeds: seeds.to_vec(),
        curves,
        per_seed,
        mean,
        std,
        clip,
    }
}
