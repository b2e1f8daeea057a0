//! The `(Init, Update)` optimizer interface and a closed enum over every
//! optimizer in the crate.

use alloc::string::String;

use crate::error::Result;
use crate::handopt::{Adam, HandOptState, NAdamW, Sgd, Sgdm};
use crate::lopt::{LOptState, MlpLOpt, NnAdam, NnAdamState};
use crate::memory::StateInventory;
use crate::scalar::Scalar;
use crate::tree::ParamTree;

pub trait Optimizer<S: Scalar>: Sync {
    type State: Clone + Send + Sync;

    fn name(&self) -> String;

    fn init(&self, params: &ParamTree<S>) -> Self::State;

    /// One update step, in place. `params` and `grads` must be congruent.
    fn update(&self, params: &mut ParamTree<S>, grads: &ParamTree<S>, state: &mut Self::State) -> Result<()>;

    fn inventory(&self, state: &Self::State) -> StateInventory;
}

#[derive(Debug, Clone)]
pub enum AnyOptimizer<S: Scalar> {
    Sgd(Sgd),
    Sgdm(Sgdm),
    Adam(Adam),
    NAdamW(NAdamW),
    Mlp(MlpLOpt<S>),
    NnAdam(NnAdam<S>),
}

#[derive(Debug, Clone)]
pub enum AnyState<S: Scalar> {
    Hand(HandOptState<S>),
    Mlp(LOptState<S>),
    NnAdam(NnAdamState<S>),
}

impl<S: Scalar> Optimizer<S> for AnyOptimizer<S> {
    type State = AnyState<S>;

    fn name(&self) -> String {
        match self {
            AnyOptimizer::Sgd(o) => Optimizer::<S>::name(o),
            AnyOptimizer::Sgdm(o) => Optimizer::<S>::name(o),
            AnyOptimizer::Adam(o) => Optimizer::<S>::name(o),
            AnyOptimizer::NAdamW(o) => Optimizer::<S>::name(o),
            AnyOptimizer::Mlp(o) => o.name(),
            AnyOptimizer::NnAdam(o) => o.name(),
        }
    }

    fn init(&self, params: &ParamTree<S>) -> AnyState<S> {
        match self {
            AnyOptimizer::Sgd(o) => AnyState::Hand(o.init(params)),
            AnyOptimizer::Sgdm(o) => AnyState::Hand(o.init(params)),
            AnyOptimizer::Adam(o) => AnyState::Hand(o.init(params)),
            AnyOptimizer::NAdamW(o) => AnyState::Hand(o.init(params)),
            AnyOptimizer::Mlp(o) => AnyState::Mlp(o.init(params)),
            AnyOptimizer::NnAdam(o) => AnyState::NnAdam(o.init(params)),
        }
    }

    fn update(&self, params: &mut ParamTree<S>, grads: &ParamTree<S>, state: &mut AnyState<S>) -> Result<()> {
        match (self, state) {
            (AnyOptimizer::Sgd(o), AnyState::Hand(s)) => o.update(params, grads, s),
            (AnyOptimizer::Sgdm(o), AnyState::Hand(s)) => o.update(params, grads, s),
            (AnyOptimizer::Adam(o), AnyState::Hand(s)) => o.update(params, grads, s),
            (AnyOptimizer::NAdamW(o), AnyState::Hand(s)) => o.update(params, grads, s),
            (AnyOptimizer::Mlp(o), AnyState::Mlp(s)) => o.update(params, grads, s),
            (AnyOptimizer::NnAdam(o), AnyState::NnAdam(s)) => o.update(params, grads, s),
            _ => Err(crate::Error::InvalidConfig("optimizer and state kinds differ".into())),
        }
    }

    fn inventory(&self, state: &AnyState<S>) -> StateInventory {
        match state {
            AnyState::Hand(s) => s.inventory(),
            AnyState::Mlp(s) => s.inventory(),
            AnyState::NnAdam(s) => s.inventory(),
        }
    }
}
