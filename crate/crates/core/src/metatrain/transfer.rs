use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::evaluate_optimizer;
use crate::handopt::{random_search, Family, SearchCfg, SearchResult};
use crate::lopt::LearnedCfg;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tasks::TaskSpec;

/// Loss of one optimizer snapshot on one task. `meta_step` is the
/// meta-training step of a learned-optimizer checkpoint, or the search budget
/// for tuned hand optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub meta_step: u64,
    pub task: String,
    pub mean_loss: f64,
    pub std_loss: f64,
}

/// Evaluates every checkpoint on every task, checkpoint-major, tasks in the
/// given order.
pub fn transfer_eval<S: Scalar>(
    learned: &LearnedCfg,
    checkpoints: &[(u64, Vec<S>)],
    tasks: &[TaskSpec],
    steps: u64,
    seeds: &[u64],
) -> Result<Vec<TransferRow>> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidConfig("transfer needs at least one checkpoint".into()));
    }
    let mut rows = Vec::with_capacity(checkpoints.len() * tasks.len());
    for (step, theta) in checkpoints {
        let opt = learned.build::<S>(theta)?;
        for task in tasks {
            let r = evaluate_optimizer(&opt, task, steps, seeds);
            rows.push(TransferRow {
                meta_step: *step,
                task: task.name.clone(),
                mean_loss: r.mean,
                std_loss: r.std,
            });
        }
    }
    Ok(rows)
}

/// The snapshot with the lowest loss on `train_task`, first on ties.
pub fn best_checkpoint(rows: &[TransferRow], train_task: &str) -> Option<u64> {
    rows.iter()
        .filter(|r| r.task == train_task)
        .fold(None::<&TransferRow>, |best, r| match best {
            Some(b) if b.mean_loss <= r.mean_loss => Some(b),
            _ => Some(r),
        })
        .map(|r| r.meta_step)
}

/// Random search over NAdamW on `train`, then for each budget the best
/// configuration among the first `budget` trials is scored on every task.
/// Every task is evaluated on the seeds the search used, so the `train`
/// column reproduces the search's best-so-far score.
pub fn nadamw_budget_transfer<S: Scalar>(
    train: &TaskSpec,
    held_out: &[TaskSpec],
    budgets: &[usize],
    search: &SearchCfg,
    rng: &Rng,
) -> Result<(SearchResult, Vec<TransferRow>)> {
    let max = budgets.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::InvalidConfig("budgets must be >= 1".into()));
    }
    let res = random_search::<S>(train, Family::Nadamw, &SearchCfg { budget: max, ..*search }, rng)?;
    let mut rows = Vec::new();
    for &b in budgets {
        if b == 0 {
            return Err(Error::InvalidConfig("budgets must be >= 1".into()));
        }
        let best = res.trials[..b].iter().fold(
            &res.trials[0],
            |acc, t| if t.mean_loss < acc.mean_loss { t } else { acc },
        );
        let opt = best.config.optimizer::<S>(search.inner_steps);
        for task in core::iter::once(train).chain(held_out) {
            let r = evaluate_optimizer(&opt, task, search.inner_steps, &res.seeds);
            rows.push(TransferRow {
                meta_step: b as u64,
                task: task.name.clone(),
                mean_loss: r.mean,
                std_loss: r.std,
            });
        }
    }
    Ok((res, rows))
}
