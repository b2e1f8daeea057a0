use core::f64::consts::PI;

use num_traits::Float;

use super::NAdamWCfg;

/// Learning rate at step `t` of a `total_steps` run.
///
/// Linear warmup from 0 to `lr_base` over the first `c_warmup` fraction,
/// then single-cycle cosine decay to `c_min_lr_mult * lr_base`, reaching the
/// minimum after a `1 - c_constant` fraction and holding it afterwards.
pub fn nadamw_schedule(t: u64, total_steps: u64, cfg: &NAdamWCfg) -> f64 {
    let t = t as f64;
    let total = total_steps as f64;
    let warm_len = total * cfg.c_warmup;
    if cfg.c_warmup > 0.0 && t < warm_len {
        return cfg.lr_base * t / warm_len;
    }
    let decay_len = total * (1.0 - cfg.c_constant);
    let progress = if decay_len > 0.0 { (t / decay_len).min(1.0) } else { 1.0 };
    let min_lr = cfg.c_min_lr_mult * cfg.lr_base;
    (cfg.lr_base - min_lr) * (0.5 * Float::cos(PI * progress) + 0.5) + min_lr
}
