use alloc::vec::Vec;
use core::marker::PhantomData;

use num_traits::Float;

use super::pes::UnrollProblem;
use crate::error::{Error, Result};
use crate::eval::{meta_objective, task_instance, unroll};
use crate::lopt::LearnedCfg;
use crate::optimizer::{AnyOptimizer, AnyState, Optimizer};
use crate::scalar::Scalar;
use crate::tasks::TaskSpec;
use crate::tree::ParamTree;

/// Scalar quadratic `L = 0.5 * curvature * phi^2` trained by
/// `phi <- phi - exp(theta) * dL/dphi`, from a fixed start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyQuadratic {
    pub curvature: f64,
    pub phi0: f64,
}

impl Default for ToyQuadratic {
    fn default() -> Self {
        ToyQuadratic {
            curvature: 1.0,
            phi0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyInner {
    pub phi: f64,
    pub t: u64,
}

impl ToyQuadratic {
    /// Losses recorded before each of `steps` updates from `phi`.
    pub fn losses(&self, theta: f64, phi: f64, steps: u64) -> Vec<f64> {
        let lr = Float::exp(theta);
        let mut phi = phi;
        (0..steps)
            .map(|_| {
                let l = 0.5 * self.curvature * phi * phi;
                phi -= lr * self.curvature * phi;
                l
            })
            .collect()
    }

    /// Mean loss over a whole episode of `steps` steps.
    pub fn episode_objective(&self, theta: f64, steps: u64) -> f64 {
        let l = self.losses(theta, self.phi0, steps);
        l.iter().sum::<f64>() / l.len() as f64
    }
}

impl UnrollProblem for ToyQuadratic {
    type Inner = ToyInner;

    fn theta_len(&self) -> usize {
        1
    }

    fn init_inner(&self, _: usize, _: u64) -> ToyInner {
        ToyInner { phi: self.phi0, t: 0 }
    }

    fn unroll(&self, theta: &[f64], inner: &mut ToyInner, steps: u64) -> f64 {
        let l = self.losses(theta[0], inner.phi, steps);
        let lr = Float::exp(theta[0]);
        for _ in 0..steps {
            inner.phi -= lr * self.curvature * inner.phi;
        }
        inner.t += steps;
        meta_objective(&l, f64::INFINITY).expect("steps >= 1")
    }
}

/// Meta-training a learned optimizer on a family of tasks, with inner
/// training in precision `S`. Task instance `b` of an episode uses
/// `tasks[b % tasks.len()]`.
#[derive(Debug, Clone)]
pub struct LOptProblem<S = f32> {
    pub learned: LearnedCfg,
    pub tasks: Vec<TaskSpec>,
    _precision: PhantomData<S>,
}

#[derive(Debug, Clone)]
pub struct LOptInner<S: Scalar> {
    pub task: TaskSpec,
    pub params: ParamTree<S>,
    pub state: Option<AnyState<S>>,
    pub step: u64,
}

impl<S: Scalar> LOptProblem<S> {
    pub fn new(learned: LearnedCfg, tasks: Vec<TaskSpec>) -> Result<Self> {
        learned.validate()?;
        if tasks.is_empty() {
            return Err(Error::InvalidConfig("meta-training needs at least one task".into()));
        }
        Ok(LOptProblem {
            learned,
            tasks,
            _precision: PhantomData,
        })
    }

    fn build(&self, theta: &[f64]) -> AnyOptimizer<S> {
        let theta: Vec<S> = theta.iter().map(|&x| S::of(x)).collect();
        self.learned.build(&theta).expect("theta length checked by the caller")
    }

    fn unroll_typed(&self, theta: &[f64], inner: &mut LOptInner<S>, steps: u64) -> f64 {
        let opt = self.build(theta);
        let state = inner.state.get_or_insert_with(|| opt.init(&inner.params));
        // Decays are meta-parameters, so the perturbed values apply to the
        // accumulators carried over from the previous truncation.
        if let (AnyOptimizer::Mlp(o), AnyState::Mlp(s)) = (&opt, &mut *state) {
            s.bank.decays = o.decays();
        }
        let losses = unroll(&opt, &inner.task, &mut inner.params, state, inner.step, steps);
        inner.step += steps;
        let clip = inner.task.clip_value();
        meta_objective(&losses, clip).unwrap_or(clip)
    }
}

impl<S: Scalar> UnrollProblem for LOptProblem<S> {
    type Inner = LOptInner<S>;

    fn theta_len(&self) -> usize {
        self.learned.theta_count()
    }

    fn init_inner(&self, index: usize, task_seed: u64) -> LOptInner<S> {
        let task = &self.tasks[index % self.tasks.len()];
        let (task, params) = task_instance(task, task_seed);
        LOptInner {
            task,
            params,
            state: None,
            step: 0,
        }
    }

    fn unroll(&self, theta: &[f64], inner: &mut LOptInner<S>, steps: u64) -> f64 {
        self.unroll_typed(theta, inner, steps)
    }
}
