use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::lstm::{lstm_cell, LstmWeights, LSTM_HIDDEN, LSTM_INPUT};
use crate::error::{Error, Result};
use crate::memory::StateInventory;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tree::ParamTree;

pub const NN_ADAM_OUTPUTS: usize = 4;
const GATES: usize = 4 * LSTM_HIDDEN;
const HEAD_W: usize = LSTM_HIDDEN * NN_ADAM_OUTPUTS;

/// Base Adam hyperparameters the controller offsets from.
pub const BASE_LR: f64 = 1e-3;
pub const BASE_BETA1: f64 = 0.9;
pub const BASE_BETA2: f64 = 0.999;
pub const BASE_EPS: f64 = 1e-8;

/// Lower clamp on `log(1 - beta)`. Keeps `beta < 1` representable in 32-bit.
pub const LOG_ONE_MINUS_BETA_MIN: f64 = -15.0;
/// Upper clamp on `log(1 - beta)`.
pub const LOG_ONE_MINUS_BETA_MAX: f64 = -1e-8;

/// `0.5 * clip(log|x|, -5, 5)`.
pub fn transform<S: Scalar>(x: S) -> S {
    let five = S::of(5.0);
    S::of(0.5) * x.abs().ln().max(-five).min(five)
}

fn sign<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        S::one()
    } else if x < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

fn mean_var<S: Scalar>(x: &[S]) -> (S, S) {
    let n = S::of(x.len() as f64);
    let mean = x.iter().copied().sum::<S>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
    (mean, var)
}

/// Per-tensor controller input, in order: momentum (mean, sign, variance),
/// second moment (mean, sign), parameter (mean, sign, variance), gradient
/// (mean, sign, variance, mean absolute value). Means and variances go
/// through [`transform`].
pub fn nn_adam_tensor_features<S: Scalar>(m: &[S], v: &[S], p: &[S], g: &[S]) -> [S; LSTM_INPUT] {
    let (mm, mv) = mean_var(m);
    let (vm, _) = mean_var(v);
    let (pm, pv) = mean_var(p);
    let (gm, gv) = mean_var(g);
    let gabs = g.iter().map(|x| x.abs()).sum::<S>() / S::of(g.len() as f64);
    [
        transform(mm),
        sign(mm),
        transform(mv),
        transform(vm),
        sign(vm),
        transform(pm),
        sign(pm),
        transform(pv),
        transform(gm),
        sign(gm),
        transform(gv),
        transform(gabs),
    ]
}

/// Adam hyperparameters emitted for one tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

fn beta_from<S: Scalar>(o: S, base: f64) -> S {
    let z = (o + S::of(num_traits::Float::ln(1.0 - base)))
        .max(S::of(LOG_ONE_MINUS_BETA_MIN))
        .min(S::of(LOG_ONE_MINUS_BETA_MAX));
    -z.exp_m1()
}

/// Maps head outputs to hyperparameters as offsets from the log-space base
/// values.
pub fn hyperparams<S: Scalar>(o: &[S; NN_ADAM_OUTPUTS]) -> HyperParams<S> {
    HyperParams {
        lr: (o[0] + S::of(num_traits::Float::ln(BASE_LR))).exp(),
        beta1: beta_from(o[1], BASE_BETA1),
        beta2: beta_from(o[2], BASE_BETA2),
        eps: (o[3] + S::of(num_traits::Float::ln(BASE_EPS))).exp(),
    }
}

/// LSTM hyperparameter controller driving Adam, one controller state per
/// tensor.
///
/// Flat layout: LSTM `w_x` `[12 x 128]`, `w_h` `[32 x 128]`, bias `[128]`
/// (gates input, forget, candidate, output), then head weights `[32 x 4]`
/// and head bias `[4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnAdam<S> {
    pub theta: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnAdamState<S> {
    pub m: ParamTree<S>,
    pub v: ParamTree<S>,
    /// Per tensor in tree order.
    pub h: Vec<Vec<S>>,
    pub c: Vec<Vec<S>>,
    pub t: u64,
}

impl<S: Scalar> NnAdamState<S> {
    pub fn inventory(&self) -> StateInventory {
        let rec: usize = self.h.iter().chain(&self.c).map(Vec::len).sum();
        StateInventory {
            per_param: self.m.num_scalars() + self.v.num_scalars(),
            sublinear: rec,
            bytes_per_scalar: S::BYTES,
        }
    }
}

impl<S: Scalar> NnAdam<S> {
    pub const THETA_COUNT: usize = LstmWeights::<S>::NUM_SCALARS + HEAD_W + NN_ADAM_OUTPUTS;

    /// LSTM weights `N(0, 1/fan_in)`, forget bias 1, other biases 0, head
    /// zero.
    pub fn init_theta(rng: &Rng) -> Self {
        let mut theta = vec![S::zero(); Self::THETA_COUNT];
        let mut s = rng.stream();
        let nx = LSTM_INPUT * GATES;
        let nh = LSTM_HIDDEN * GATES;
        let sx = 1.0 / num_traits::Float::sqrt(LSTM_INPUT as f64);
        let sh = 1.0 / num_traits::Float::sqrt(LSTM_HIDDEN as f64);
        for x in &mut theta[..nx] {
            *x = S::of(sx * s.normal());
        }
        for x in &mut theta[nx..nx + nh] {
            *x = S::of(sh * s.normal());
        }
        for x in &mut theta[nx + nh + LSTM_HIDDEN..nx + nh + 2 * LSTM_HIDDEN] {
            *x = S::one();
        }
        NnAdam { theta }
    }

    pub fn from_flat(flat: &[S]) -> Result<Self> {
        if flat.len() != Self::THETA_COUNT {
            return Err(Error::ThetaLength {
                expected: Self::THETA_COUNT,
                got: flat.len(),
            });
        }
        Ok(NnAdam { theta: flat.to_vec() })
    }

    pub fn name(&self) -> String {
        "nn_adam".into()
    }

    fn lstm(&self) -> LstmWeights<'_, S> {
        let (w_x, rest) = self.theta.split_at(LSTM_INPUT * GATES);
        let (w_h, rest) = rest.split_at(LSTM_HIDDEN * GATES);
        LstmWeights {
            w_x,
            w_h,
            b: &rest[..GATES],
        }
    }

    fn head(&self) -> (&[S], &[S]) {
        let start = LstmWeights::<S>::NUM_SCALARS;
        let (w, b) = self.theta[start..].split_at(HEAD_W);
        (w, b)
    }

    pub fn zero_head(&mut self) {
        let start = LstmWeights::<S>::NUM_SCALARS;
        self.theta[start..].iter_mut().for_each(|x| *x = S::zero());
    }

    /// One controller step: returns the hyperparameters and the next
    /// recurrent state.
    pub fn control(&self, x: &[S; LSTM_INPUT], h: &[S], c: &[S]) -> (HyperParams<S>, Vec<S>, Vec<S>) {
        let (h2, c2) = lstm_cell(x, h, c, &self.lstm());
        let (w, b) = self.head();
        let mut o = [S::zero(); NN_ADAM_OUTPUTS];
        for (k, o) in o.iter_mut().enumerate() {
            *o = b[k];
            for j in 0..LSTM_HIDDEN {
                *o = *o + h2[j] * w[j * NN_ADAM_OUTPUTS + k];
            }
        }
        (hyperparams(&o), h2, c2)
    }

    pub fn init(&self, params: &ParamTree<S>) -> NnAdamState<S> {
        NnAdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            h: vec![vec![S::zero(); LSTM_HIDDEN]; params.len()],
            c: vec![vec![S::zero(); LSTM_HIDDEN]; params.len()],
            t: 0,
        }
    }

    /// Features from the pre-update moments, then bias-corrected Adam with the
    /// emitted hyperparameters.
    pub fn update(&self, params: &mut ParamTree<S>, grads: &ParamTree<S>, state: &mut NnAdamState<S>) -> Result<()> {
        params.check_congruent(grads)?;
        let one = S::one();
        let t = state.t;
        for (k, ((name, p), g)) in params.iter_mut().zip(grads.tensors()).enumerate() {
            let m = state.m.get_mut(name).expect("congruent").data_mut();
            let v = state.v.get_mut(name).expect("congruent").data_mut();
            let p = p.data_mut();
            let g = g.data();
            let x = nn_adam_tensor_features(m, v, p, g);
            let (hp, h2, c2) = self.control(&x, &state.h[k], &state.c[k]);
            state.h[k] = h2;
            state.c[k] = c2;
            let bc1 = one - hp.beta1.powi((t + 1) as i32);
            let bc2 = one - hp.beta2.powi((t + 1) as i32);
            for i in 0..p.len() {
                m[i] = hp.beta1 * m[i] + (one - hp.beta1) * g[i];
                v[i] = hp.beta2 * v[i] + (one - hp.beta2) * g[i] * g[i];
                p[i] = p[i] - hp.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + hp.eps);
            }
        }
        state.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handopt::{adam_update, AdamCfg, HandOptState};

    #[test]
    fn theta_count() {
        assert_eq!(NnAdam::<f32>::THETA_COUNT, 5892);
        assert_eq!(NnAdam::<f32>::init_theta(&Rng::new(0)).theta.len(), 5892);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform(0.0f64), -2.5);
        assert_eq!(transform(1.0f64), 0.0);
        assert_eq!(transform(10f64.exp()), 2.5);
        let f = nn_adam_tensor_features(&[0.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        for k in [0, 2, 3, 5, 7, 8, 10, 11] {
            assert_eq!(f[k], -2.5);
        }
        for k in [1, 4, 6, 9] {
            assert_eq!(f[k], 0.0);
        }
        let f = nn_adam_tensor_features(&[1.0, 1.0], &[1.0, 1.0], &[-2.0, -2.0], &[0.5, -0.5]);
        assert_eq!((f[0], f[1]), (0.0, 1.0));
        assert_eq!(f[2], -2.5);
        assert_eq!(f[6], -1.0);
        assert_eq!(f[9], 0.0);
        assert!((f[10] - 0.5 * 0.25f64.ln()).abs() < 1e-15);
        assert!((f[11] - 0.5 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_head_reduces_to_adam() {
        let rng = Rng::new(3);
        let mut nn = NnAdam::<f64>::init_theta(&rng);
        nn.zero_head();
        let mk = |seed: u64| {
            let r = Rng::new(seed);
            let mut p = ParamTree::new();
            p.insert("a", r.fold_in(0).normal(&[4, 3]));
            p.insert("b", r.fold_in(1).normal(&[3]));
            p
        };
        let mut p1 = mk(1);
        let mut p2 = p1.clone();
        let mut s1 = nn.init(&p1);
        let mut s2 = HandOptState::with_moments(&p2);
        let cfg = AdamCfg::default();
        for k in 0..100 {
            let g = mk(100 + k);
            nn.update(&mut p1, &g, &mut s1).unwrap();
            adam_update(&mut p2, &g, &mut s2, &cfg).unwrap();
        }
        for (a, b) in p1.flatten().iter().zip(p2.flatten()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hyperparameter_ranges() {
        let mut s = Rng::new(9).stream();
        for _ in 0..2000 {
            let o = [0; 4].map(|_| 40.0 * (s.uniform() - 0.5));
            let hp = hyperparams::<f64>(&o);
            assert!(hp.lr > 0.0 && hp.eps > 0.0);
            assert!(hp.beta1 > 0.0 && hp.beta1 < 1.0);
            assert!(hp.beta2 > 0.0 && hp.beta2 < 1.0);
            let o32 = o.map(|x| x as f32);
            let hp = hyperparams::<f32>(&o32);
            assert!(hp.beta1 > 0.0 && hp.beta1 < 1.0, "{o32:?}");
            assert!(hp.beta2 > 0.0 && hp.beta2 < 1.0, "{o32:?}");
        }
        let hp = hyperparams::<f64>(&[0.0; 4]);
        assert!((hp.lr - 1e-3).abs() < 1e-18);
        assert!((hp.beta1 - 0.9).abs() < 1e-15);
        assert!((hp.beta2 - 0.999).abs() < 1e-15);
        assert!((hp.eps - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn golden_controller_step() {
        let mut nn = NnAdam::<f64>::init_theta(&Rng::new(11));
        let mut s = Rng::new(12).stream();
        let start = LstmWeights::<f64>::NUM_SCALARS;
        for x in &mut nn.theta[start..] {
            *x = 0.1 * s.normal();
        }
        let x = [0; LSTM_INPUT].map(|_| s.normal());
        let (hp, _, _) = nn.control(&x, &[0.0; LSTM_HIDDEN], &[0.0; LSTM_HIDDEN]);
        let got = [hp.lr, hp.beta1, hp.beta2, hp.eps];
        for (g, w) in got.iter().zip(GOLDEN_HP) {
            assert!((g - w).abs() <= 1e-12 * w.abs(), "{got:?}");
        }
    }

    const GOLDEN_HP: [f64; 4] = [
        0.0010397627112811282,
        0.9165292063937843,
        0.998769363195796,
        1.1692496901866807e-8,
    ];
}
