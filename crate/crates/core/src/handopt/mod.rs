//! Hand-designed optimizers: SGD, heavy-ball SGDM, Adam and NAdamW, plus the
//! learning-rate grid, the NAdamW search space and random search.

mod schedule;
mod search;

use alloc::format;
use alloc::string::String;

use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use schedule::nadamw_schedule;
pub use search::{
    lr_grid, random_search, sample_nadamw, Family, HandConfig, SearchCfg, SearchResult, Trial, SGDM_MOMENTUM,
};

use crate::error::{Error, Result};
use crate::memory::StateInventory;
use crate::optimizer::Optimizer;
use crate::scalar::Scalar;
use crate::tree::ParamTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdCfg {
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdmCfg {
    pub lr: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamCfg {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamCfg {
    fn default() -> Self {
        AdamCfg {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Ten NAdamW hyperparameters: Adam's four, two weight decays, the
/// Nesterov switch and three schedule controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NAdamWCfg {
    pub lr_base: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coefficient on `||phi||^2` added to the loss.
    pub l2_wd: f64,
    /// Decoupled (AdamW) decay, scaled by the scheduled learning rate.
    pub l2_adamw: f64,
    pub use_nesterov: bool,
    /// Warmup length as a fraction of the run.
    pub c_warmup: f64,
    /// Fraction of the run held at the minimum learning rate.
    pub c_constant: f64,
    /// Minimum learning rate as a multiple of `lr_base`.
    pub c_min_lr_mult: f64,
}

impl NAdamWCfg {
    /// Plain Adam: no decay, no Nesterov, flat schedule.
    pub fn from_adam(a: &AdamCfg) -> Self {
        NAdamWCfg {
            lr_base: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            l2_wd: 0.0,
            l2_adamw: 0.0,
            use_nesterov: false,
            c_warmup: 0.0,
            c_constant: 0.0,
            c_min_lr_mult: 1.0,
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(what()))
    }
}

impl SgdCfg {
    pub fn validate(&self) -> Result<()> {
        check(self.lr >= 0.0, || format!("lr {} < 0", self.lr))
    }
}

impl SgdmCfg {
    pub fn validate(&self) -> Result<()> {
        check(self.lr >= 0.0, || format!("lr {} < 0", self.lr))?;
        check((0.0..1.0).contains(&self.momentum), || {
            format!("momentum {} outside [0, 1)", self.momentum)
        })
    }
}

fn validate_betas(beta1: f64, beta2: f64, eps: f64) -> Result<()> {
    check(beta1 > 0.0 && beta1 < 1.0, || format!("beta1 {beta1} outside (0, 1)"))?;
    check(beta2 > 0.0 && beta2 < 1.0, || format!("beta2 {beta2} outside (0, 1)"))?;
    check(eps > 0.0, || format!("eps {eps} <= 0"))
}

impl AdamCfg {
    pub fn validate(&self) -> Result<()> {
        check(self.lr >= 0.0, || format!("lr {} < 0", self.lr))?;
        validate_betas(self.beta1, self.beta2, self.eps)
    }
}

impl NAdamWCfg {
    pub fn validate(&self) -> Result<()> {
        check(self.lr_base >= 0.0, || format!("lr_base {} < 0", self.lr_base))?;
        validate_betas(self.beta1, self.beta2, self.eps)?;
        check(self.l2_wd >= 0.0 && self.l2_adamw >= 0.0, || {
            "negative weight decay".into()
        })?;
        check((0.0..=0.1).contains(&self.c_warmup), || {
            format!("c_warmup {} outside [0, 0.1]", self.c_warmup)
        })?;
        check((0.0..=1.0).contains(&self.c_constant), || {
            format!("c_constant {} outside [0, 1]", self.c_constant)
        })?;
        check((0.0..=1.0).contains(&self.c_min_lr_mult), || {
            format!("c_min_lr_mult {} outside [0, 1]", self.c_min_lr_mult)
        })
    }
}

/// Accumulators of a hand-designed optimizer. `m` and `v` are present only
/// for optimizers that use them.
#[derive(Debug, Clone, PartialEq)]
pub struct HandOptState<S> {
    pub m: Option<ParamTree<S>>,
    pub v: Option<ParamTree<S>>,
    pub t: u64,
}

impl<S: Scalar> HandOptState<S> {
    pub fn stateless() -> Self {
        HandOptState { m: None, v: None, t: 0 }
    }

    pub fn with_momentum(params: &ParamTree<S>) -> Self {
        HandOptState {
            m: Some(params.zeros_like()),
            v: None,
            t: 0,
        }
    }

    pub fn with_moments(params: &ParamTree<S>) -> Self {
        HandOptState {
            m: Some(params.zeros_like()),
            v: Some(params.zeros_like()),
            t: 0,
        }
    }

    pub fn inventory(&self) -> StateInventory {
        let per = |t: &Option<ParamTree<S>>| t.as_ref().map_or(0, ParamTree::num_scalars);
        StateInventory {
            per_param: per(&self.m) + per(&self.v),
            sublinear: 0,
            bytes_per_scalar: S::BYTES,
        }
    }
}

fn zip_update<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    mut f: impl FnMut(&str, &mut [S], &[S]),
) -> Result<()> {
    params.check_congruent(grads)?;
    for ((name, p), g) in params.iter_mut().zip(grads.tensors()) {
        f(name, p.data_mut(), g.data());
    }
    Ok(())
}

fn moments_mut<'a, S: Scalar>(state: &'a mut HandOptState<S>, name: &str) -> (&'a mut [S], &'a mut [S]) {
    let m = state.m.as_mut().expect("first moment allocated");
    let v = state.v.as_mut().expect("second moment allocated");
    (
        m.get_mut(name).expect("congruent").data_mut(),
        v.get_mut(name).expect("congruent").data_mut(),
    )
}

/// `phi' = phi - lr * g`.
pub fn sgd_update<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    state: &mut HandOptState<S>,
    cfg: &SgdCfg,
) -> Result<()> {
    let lr = S::of(cfg.lr);
    zip_update(params, grads, |_, p, g| {
        for (p, &g) in p.iter_mut().zip(g) {
            *p = *p - lr * g;
        }
    })?;
    state.t += 1;
    Ok(())
}

/// Heavy ball without dampening: `m' = mu*m + g`, `phi' = phi - lr*m'`.
pub fn sgdm_update<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    state: &mut HandOptState<S>,
    cfg: &SgdmCfg,
) -> Result<()> {
    let (lr, mu) = (S::of(cfg.lr), S::of(cfg.momentum));
    let m = state.m.as_mut().expect("momentum allocated");
    zip_update(params, grads, |name, p, g| {
        let m = m.get_mut(name).expect("congruent").data_mut();
        for ((p, &g), m) in p.iter_mut().zip(g).zip(m.iter_mut()) {
            *m = mu * *m + g;
            *p = *p - lr * *m;
        }
    })?;
    state.t += 1;
    Ok(())
}

/// Bias-corrected Adam with `eps` added outside the square root.
pub fn adam_update<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    state: &mut HandOptState<S>,
    cfg: &AdamCfg,
) -> Result<()> {
    let t = state.t;
    let one = S::one();
    let (b1, b2, eps, lr) = (S::of(cfg.beta1), S::of(cfg.beta2), S::of(cfg.eps), S::of(cfg.lr));
    let bc1 = S::of(1.0 - Float::powi(cfg.beta1, (t + 1) as i32));
    let bc2 = S::of(1.0 - Float::powi(cfg.beta2, (t + 1) as i32));
    params.check_congruent(grads)?;
    for ((name, p), g) in params.iter_mut().zip(grads.tensors()) {
        let (m, v) = moments_mut(state, name);
        for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
    }
    state.t += 1;
    Ok(())
}

/// NAdamW at step `state.t` of a `total_steps` run.
pub fn nadamw_update<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    state: &mut HandOptState<S>,
    cfg: &NAdamWCfg,
    total_steps: u64,
) -> Result<()> {
    let lr = nadamw_schedule(state.t, total_steps, cfg);
    nadamw_step(params, grads, state, cfg, lr)
}

fn nadamw_step<S: Scalar>(
    params: &mut ParamTree<S>,
    grads: &ParamTree<S>,
    state: &mut HandOptState<S>,
    cfg: &NAdamWCfg,
    lr: f64,
) -> Result<()> {
    let t = state.t;
    let b1 = S::of(cfg.beta1);
    let b2 = S::of(cfg.beta2);
    let one = S::one();
    let bc1 = S::of(1.0 - Float::powi(cfg.beta1, (t + 1) as i32));
    let bc2 = S::of(1.0 - Float::powi(cfg.beta2, (t + 1) as i32));
    let eps = S::of(cfg.eps);
    let lr = S::of(lr);
    let wd2 = S::of(2.0 * cfg.l2_wd);
    let decoupled = S::of(cfg.l2_adamw);
    let nesterov = cfg.use_nesterov;
    params.check_congruent(grads)?;
    for ((name, p), g) in params.iter_mut().zip(grads.tensors()) {
        let (m, v) = moments_mut(state, name);
        let p = p.data_mut();
        for i in 0..p.len() {
            let phi = p[i];
            let g = g.data()[i] + wd2 * phi;
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / bc1;
            let denom = (v[i] / bc2).sqrt() + eps;
            let u = if nesterov {
                (b1 * m_hat + (one - b1) * g) / denom
            } else {
                m_hat / denom
            };
            p[i] = phi - lr * u - lr * decoupled * phi;
        }
    }
    state.t += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgd(pub SgdCfg);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgdm(pub SgdmCfg);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam(pub AdamCfg);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NAdamW {
    pub cfg: NAdamWCfg,
    /// Run length used by the schedule.
    pub total_steps: u64,
}

impl<S: Scalar> Optimizer<S> for Sgd {
    type State = HandOptState<S>;
    fn name(&self) -> String {
        "sgd".into()
    }
    fn init(&self, _: &ParamTree<S>) -> Self::State {
        HandOptState::stateless()
    }
    fn update(&self, p: &mut ParamTree<S>, g: &ParamTree<S>, s: &mut Self::State) -> Result<()> {
        sgd_update(p, g, s, &self.0)
    }
    fn inventory(&self, s: &Self::State) -> StateInventory {
        s.inventory()
    }
}

impl<S: Scalar> Optimizer<S> for Sgdm {
    type State = HandOptState<S>;
    fn name(&self) -> String {
        "sgdm".into()
    }
    fn init(&self, params: &ParamTree<S>) -> Self::State {
        HandOptState::with_momentum(params)
    }
    fn update(&self, p: &mut ParamTree<S>, g: &ParamTree<S>, s: &mut Self::State) -> Result<()> {
        sgdm_update(p, g, s, &self.0)
    }
    fn inventory(&self, s: &Self::State) -> StateInventory {
        s.inventory()
    }
}

impl<S: Scalar> Optimizer<S> for Adam {
    type State = HandOptState<S>;
    fn name(&self) -> String {
        "adam".into()
    }
    fn init(&self, params: &ParamTree<S>) -> Self::State {
        HandOptState::with_moments(params)
    }
    fn update(&self, p: &mut ParamTree<S>, g: &ParamTree<S>, s: &mut Self::State) -> Result<()> {
        adam_update(p, g, s, &self.0)
    }
    fn inventory(&self, s: &Self::State) -> StateInventory {
        s.inventory()
    }
}

impl<S: Scalar> Optimizer<S> for NAdamW {
    type State = HandOptState<S>;
    fn name(&self) -> String {
        "nadamw".into()
    }
    fn init(&self, params: &ParamTree<S>) -> Self::State {
        HandOptState::with_moments(params)
    }
    fn update(&self, p: &mut ParamTree<S>, g: &ParamTree<S>, s: &mut Self::State) -> Result<()> {
        nadamw_update(p, g, s, &self.cfg, self.total_steps)
    }
    fn inventory(&self, s: &Self::State) -> StateInventory {
        s.inventory()
    }
}

#[cfg(test)]
mod tests;
