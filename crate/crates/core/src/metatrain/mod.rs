//! Meta-training with Persistent Evolution Strategies over truncated
//! unrolls, and transfer evaluation of the results.

mod pes;
mod problems;
mod trainer;
mod transfer;

pub use crate::eval::{evaluate_optimizer, meta_objective, EvalResult};
pub use pes::{pes_init, pes_noise, pes_truncation_step, PesCfg, PesPair, PesState, PesStep, UnrollProblem};
pub use problems::{LOptInner, LOptProblem, ToyInner, ToyQuadratic};
pub use trainer::{
    clip_elementwise, EpisodeRecord, MetaAdam, MetaTrainCfg, MetaTrainer, TrainState, DEFAULT_GRAD_CLIP, META_LR_GRID,
};
pub use transfer::{best_checkpoint, nadamw_budget_transfer, transfer_eval, TransferRow};
