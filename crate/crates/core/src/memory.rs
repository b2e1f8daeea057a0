//! Exact optimizer state accounting.
//!
//! Every optimizer reports an enumeration of the state it actually holds
//! ([`StateInventory`]). [`memory_account`] compares that against the
//! closed-form count for the optimizer kind and refuses to report a number
//! when the two disagree.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{AnyOptimizer, Optimizer};
use crate::scalar::Scalar;
use crate::tree::ParamTree;

/// Hidden plus cell state carried per tensor by the LSTM controller.
pub const NN_ADAM_SCALARS_PER_TENSOR: usize = 2 * crate::lopt::LSTM_HIDDEN;

/// Scalars counted from live state tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateInventory {
    /// Scalars in state tensors shaped like a parameter.
    pub per_param: usize,
    /// Everything else: factored statistics, recurrent controller state.
    pub sublinear: usize,
    pub bytes_per_scalar: usize,
}

impl StateInventory {
    pub fn total(&self) -> usize {
        self.per_param + self.sublinear
    }

    pub fn bytes(&self) -> usize {
        self.total() * self.bytes_per_scalar
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryAccount {
    pub optimizer: String,
    pub per_param_scalars: usize,
    pub sublinear_scalars: usize,
    pub total_scalars: usize,
    pub total_bytes: usize,
}

/// Closed-form state size of `opt` on `params` as (per-param, sub-linear).
pub fn analytic_state<S: Scalar>(opt: &AnyOptimizer<S>, params: &ParamTree<S>) -> (usize, usize) {
    let p = params.num_scalars();
    match opt {
        AnyOptimizer::Sgd(_) => (0, 0),
        AnyOptimizer::Sgdm(_) => (p, 0),
        AnyOptimizer::Adam(_) | AnyOptimizer::NAdamW(_) => (2 * p, 0),
        AnyOptimizer::Mlp(o) => {
            let d = &o.cfg.features;
            let per = d.momentum_decays.len() + d.second_moment_decays.len();
            let rc: usize = params
                .tensors()
                .map(|t| {
                    let (r, c) = t.factored_dims();
                    r + c
                })
                .sum();
            (per * p, d.adafactor_decays.len() * rc)
        }
        AnyOptimizer::NnAdam(_) => (2 * p, NN_ADAM_SCALARS_PER_TENSOR * params.len()),
    }
}

/// Initializes `opt` on `params` and checks the enumerated state against
/// [`analytic_state`].
pub fn memory_account<S: Scalar>(opt: &AnyOptimizer<S>, params: &ParamTree<S>) -> Result<MemoryAccount> {
    let state = opt.init(params);
    let inv = opt.inventory(&state);
    let (per, sub) = analytic_state(opt, params);
    let name = opt.name();
    if (per, sub) != (inv.per_param, inv.sublinear) {
        return Err(Error::AccountingMismatch {
            optimizer: name,
            analytic: per + sub,
            enumerated: inv.total(),
        });
    }
    Ok(MemoryAccount {
        optimizer: name,
        per_param_scalars: per,
        sublinear_scalars: sub,
        total_scalars: inv.total(),
        total_bytes: inv.bytes(),
    })
}
