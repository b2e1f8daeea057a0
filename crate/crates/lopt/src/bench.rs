//! Wall-clock cost of one training step, overhead relative to SGD, and state
//! memory.

use std::time::Instant;

use lopt_core::eval::task_instance;
use lopt_core::handopt::{Sgd, SgdCfg};
use lopt_core::memory::memory_account;
use lopt_core::tasks::{synth_mlp_task, TaskSpec};
use lopt_core::{AnyOptimizer, Optimizer, Scalar};

use crate::error::Result;
use crate::records::BenchRow;

pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_WARMUP: usize = 3;
pub const SWEEP_REPETITIONS: usize = 5;
pub const DEFAULT_BATCH_SIZES: [usize; 4] = [32, 128, 512, 2048];

#[derive(Debug, Clone, PartialEq)]
pub struct TimingResult {
    pub optimizer: String,
    pub task: String,
    pub batch_size: usize,
    pub width: usize,
    pub median_s: f64,
    pub repeats: usize,
    pub warmup: usize,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `loss_and_grad` plus `update`, after `warmup`
/// untimed steps. `width` is reported only.
pub fn time_step<S: Scalar>(
    name: &str,
    opt: &AnyOptimizer<S>,
    task: &TaskSpec,
    width: usize,
    repeats: usize,
    warmup: usize,
) -> TimingResult {
    let (task_i, mut params) = task_instance::<S>(task, 0);
    let mut state = opt.init(&params);
    let mut times = Vec::with_capacity(repeats);
    for k in 0..warmup + repeats.max(1) {
        let batch = task_i.next_batch::<S>(k as u64);
        let t0 = Instant::now();
        let (loss, grads) = task_i.loss_and_grad(&params, &batch);
        // A diverged state still costs the same arithmetic.
        let _ = opt.update(&mut params, &grads, &mut state);
        std::hint::black_box(loss);
        if k >= warmup {
            times.push(t0.elapsed().as_secs_f64());
        }
    }
    TimingResult {
        optimizer: name.to_string(),
        task: task.name.clone(),
        batch_size: task.batch_size,
        width,
        median_s: median(&times),
        repeats: repeats.max(1),
        warmup,
    }
}

/// `time(optimizer) / time(SGD)`.
pub fn overhead_ratio(opt_s: f64, sgd_s: f64) -> Result<f64> {
    if sgd_s.is_nan() || sgd_s <= 0.0 {
        return Err(lopt_core::Error::ZeroBaseline.into());
    }
    Ok(opt_s / sgd_s)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone)]
pub struct SweepCfg {
    pub batch_sizes: Vec<usize>,
    pub widths: Vec<usize>,
    pub repeats: usize,
    pub warmup: usize,
    /// Independent measurements per cell; the table reports their median
    /// and standard deviation.
    pub repetitions: usize,
}

impl Default for SweepCfg {
    fn default() -> Self {
        SweepCfg {
            batch_sizes: DEFAULT_BATCH_SIZES.to_vec(),
            widths: vec![32],
            repeats: DEFAULT_REPEATS,
            warmup: DEFAULT_WARMUP,
            repetitions: 1,
        }
    }
}

/// Times every optimizer on the synthetic MLP at every (width, batch size),
/// width-major. SGD is measured alongside in every repetition and the
/// overhead is the median of the per-repetition ratios.
pub fn sweep<S: Scalar>(optimizers: &[(String, AnyOptimizer<S>)], cfg: &SweepCfg) -> Result<Vec<BenchRow>> {
    let sgd = AnyOptimizer::<S>::Sgd(Sgd(SgdCfg { lr: 1e-3 }));
    let mut rows = Vec::new();
    for &width in &cfg.widths {
        for &batch in &cfg.batch_sizes {
            let task = synth_mlp_task(width, batch)?;
            let (_, params) = task_instance::<S>(&task, 0);
            for (name, opt) in optimizers {
                let mut times = Vec::with_capacity(cfg.repetitions);
                let mut ratios = Vec::with_capacity(cfg.repetitions);
                for _ in 0..cfg.repetitions.max(1) {
                    let base = time_step("sgd", &sgd, &task, width, cfg.repeats, cfg.warmup);
                    let t = time_step(name, opt, &task, width, cfg.repeats, cfg.warmup);
                    ratios.push(overhead_ratio(t.median_s, base.median_s)?);
                    times.push(t.median_s);
                }
                let (_, std) = lopt_core::eval::mean_std(&times);
                let acct = memory_account(opt, &params)?;
                rows.push(BenchRow {
                    optimizer: name.clone(),
                    task: task.name.clone(),
                    width,
                    batch_size: batch,
                    median_s: median(&times),
                    std_s: std,
                    overhead_vs_sgd: median(&ratios),
                    state_scalars: acct.total_scalars,
                    state_bytes: acct.total_bytes,
                });
            }
        }
    }
    Ok(rows)
}
