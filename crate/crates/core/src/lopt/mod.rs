//! Learned optimizers: the per-parameter MLP family and the LSTM
//! hyperparameter controller for Adam.

mod lstm;
mod mlp_lopt;
mod nn_adam;

pub use lstm::{lstm_cell, lstm_cell_jvp, LstmWeights, LSTM_HIDDEN, LSTM_INPUT};
pub use mlp_lopt::{LOptState, MlpLOpt, MlpLOptCfg, MlpTheta};
pub use nn_adam::{
    hyperparams, nn_adam_tensor_features, transform, HyperParams, NnAdam, NnAdamState, BASE_BETA1, BASE_BETA2,
    BASE_EPS, BASE_LR, NN_ADAM_OUTPUTS,
};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizer::AnyOptimizer;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Architecture of a learned optimizer, independent of its meta-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnedCfg {
    Mlp(MlpLOptCfg),
    NnAdam,
}

impl LearnedCfg {
    pub fn theta_count(&self) -> usize {
        match self {
            LearnedCfg::Mlp(c) => c.theta_count(),
            LearnedCfg::NnAdam => NnAdam::<f64>::THETA_COUNT,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnedCfg::Mlp(_) => "mlp_lopt",
            LearnedCfg::NnAdam => "nn_adam",
        }
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        match self {
            LearnedCfg::Mlp(c) => c.hidden_sizes(),
            LearnedCfg::NnAdam => alloc::vec![LSTM_HIDDEN],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnedCfg::Mlp(c) => c.validate(),
            LearnedCfg::NnAdam => Ok(()),
        }
    }

    /// Meta-initialization as a flat vector.
    pub fn init_theta<S: Scalar>(&self, rng: &Rng) -> Result<Vec<S>> {
        Ok(match self {
            LearnedCfg::Mlp(c) => MlpLOpt::<S>::init_theta(c.clone(), rng)?.flat(),
            LearnedCfg::NnAdam => NnAdam::<S>::init_theta(rng).theta,
        })
    }

    pub fn build<S: Scalar>(&self, theta: &[S]) -> Result<AnyOptimizer<S>> {
        Ok(match self {
            LearnedCfg::Mlp(c) => AnyOptimizer::Mlp(MlpLOpt::from_flat(c.clone(), theta)?),
            LearnedCfg::NnAdam => AnyOptimizer::NnAdam(NnAdam::from_flat(theta)?),
        })
    }

    pub fn name(&self) -> String {
        match self {
            LearnedCfg::Mlp(c) if c.is_small_fc_lopt() => "small_fc_lopt".into(),
            LearnedCfg::Mlp(c) => alloc::format!("mlp_lopt[{},{}x{}]", c.features.preset, c.hidden, c.depth),
            LearnedCfg::NnAdam => "nn_adam".into(),
        }
    }
}
