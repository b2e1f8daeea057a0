use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accum::{features_compute, preset, AccumBank, Decays, FeatureConfig};
use crate::error::{Error, Result};
use crate::memory::StateInventory;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tree::ParamTree;

/// Architecture and feature set of a per-parameter MLP optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpLOptCfg {
    pub features: FeatureConfig,
    pub hidden: usize,
    pub depth: usize,
    /// Scale of the direction output.
    pub step_mult: f64,
    /// Scale of the log-magnitude output.
    pub exp_mult: f64,
}

impl Default for MlpLOptCfg {
    fn default() -> Self {
        MlpLOptCfg {
            features: preset("small_fc_lopt").expect("built-in preset"),
            hidden: 4,
            depth: 2,
            step_mult: 1e-3,
            exp_mult: 1e-3,
        }
    }
}

impl MlpLOptCfg {
    pub fn with_preset(name: &str) -> Result<Self> {
        Ok(MlpLOptCfg {
            features: preset(name)?,
            ..Self::default()
        })
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    /// `[F, hidden, ..., hidden, 2]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut d = vec![self.features.num_features()];
        d.extend(core::iter::repeat_n(self.hidden, self.depth));
        d.push(2);
        d
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        vec![self.hidden; self.depth]
    }

    pub fn mlp_count(&self) -> usize {
        self.layer_dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Length of the flat meta-parameter vector.
    pub fn theta_count(&self) -> usize {
        self.mlp_count() + self.features.num_decays()
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden size must be >= 1".into()));
        }
        if !(self.step_mult.is_finite() && self.exp_mult.is_finite()) {
            return Err(Error::InvalidConfig("output multipliers must be finite".into()));
        }
        Ok(())
    }

    pub fn is_small_fc_lopt(&self) -> bool {
        *self == Self::default()
    }
}

/// Structured view of the meta-parameters.
///
/// Flat order: for each layer, the `[in x out]` weight matrix row-major then
/// the bias; then one raw decay per accumulator timescale, momentum first,
/// then second moment, then AdaFactor. Decays are `sigmoid(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpTheta<S> {
    pub layers: Vec<(Vec<S>, Vec<S>)>,
    pub rho: Vec<S>,
}

impl<S: Scalar> MlpTheta<S> {
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.rho);
        out
    }

    pub fn unflatten(flat: &[S], cfg: &MlpLOptCfg) -> Result<Self> {
        let expected = cfg.theta_count();
        if flat.len() != expected {
            return Err(Error::ThetaLength {
                expected,
                got: flat.len(),
            });
        }
        let mut rest = flat;
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a.to_vec()
        };
        let layers = cfg
            .layer_dims()
            .windows(2)
            .map(|d| (take(d[0] * d[1]), take(d[1])))
            .collect();
        let rho = take(cfg.features.num_decays());
        Ok(MlpTheta { layers, rho })
    }
}

fn logit(p: f64) -> f64 {
    num_traits::Float::ln(p / (1.0 - p))
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Per-parameter MLP learned optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLOpt<S> {
    pub cfg: MlpLOptCfg,
    pub theta: MlpTheta<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LOptState<S> {
    pub bank: AccumBank<S>,
    pub t: u64,
}

impl<S: Scalar> LOptState<S> {
    pub fn inventory(&self) -> StateInventory {
        StateInventory {
            per_param: self.bank.per_param_scalars(),
            sublinear: self.bank.factored_scalars(),
            bytes_per_scalar: S::BYTES,
        }
    }
}

impl<S: Scalar> MlpLOpt<S> {
    /// Weights `N(0, 1/fan_in)`, zero biases, raw decays at the logits of the
    /// configured decay values.
    pub fn init_theta(cfg: MlpLOptCfg, rng: &Rng) -> Result<Self> {
        cfg.validate()?;
        let mut s = rng.stream();
        let layers = cfg
            .layer_dims()
            .windows(2)
            .map(|d| {
                let std = 1.0 / num_traits::Float::sqrt(d[0] as f64);
                let w = (0..d[0] * d[1]).map(|_| S::of(std * s.normal())).collect();
                (w, vec![S::zero(); d[1]])
            })
            .collect();
        let f = &cfg.features;
        let rho = f
            .momentum_decays
            .iter()
            .chain(&f.second_moment_decays)
            .chain(&f.adafactor_decays)
            .map(|&b| S::of(logit(b)))
            .collect();
        Ok(MlpLOpt {
            cfg,
            theta: MlpTheta { layers, rho },
        })
    }

    pub fn from_flat(cfg: MlpLOptCfg, flat: &[S]) -> Result<Self> {
        cfg.validate()?;
        let theta = MlpTheta::unflatten(flat, &cfg)?;
        Ok(MlpLOpt { cfg, theta })
    }

    pub fn flat(&self) -> Vec<S> {
        self.theta.flatten()
    }

    /// Same architecture, different meta-parameters.
    pub fn with_flat(&self, flat: &[S]) -> Result<Self> {
        Ok(MlpLOpt {
            cfg: self.cfg.clone(),
            theta: MlpTheta::unflatten(flat, &self.cfg)?,
        })
    }

    /// Zeroes every MLP weight and bias, leaving the decays.
    pub fn zero_mlp(&mut self) {
        for (w, b) in &mut self.theta.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = S::zero());
        }
    }

    pub fn decays(&self) -> Decays<S> {
        let f = &self.cfg.features;
        let mut it = self.theta.rho.iter().map(|&r| sigmoid(r));
        Decays {
            momentum: it.by_ref().take(f.momentum_decays.len()).collect(),
            second_moment: it.by_ref().take(f.second_moment_decays.len()).collect(),
            adafactor: it.collect(),
        }
    }

    pub fn name(&self) -> String {
        super::LearnedCfg::Mlp(self.cfg.clone()).name()
    }

    pub fn init(&self, params: &ParamTree<S>) -> LOptState<S> {
        LOptState {
            bank: AccumBank::new(params, self.decays()),
            t: 0,
        }
    }

    /// Runs the network on a feature matrix and returns `(direction, magnitude)`
    /// per element.
    fn outputs(&self, fm: &crate::accum::FeatureMatrix<S>) -> (Vec<S>, Vec<S>) {
        let n = fm.len;
        let (w0, b0) = &self.theta.layers[0];
        let width0 = b0.len();
        let ncols = fm.columns.len();
        // Time features are constant across the tensor, so they fold into
        // the first bias.
        let mut bias = b0.clone();
        for (k, &tk) in fm.time.iter().enumerate() {
            let row = &w0[(ncols + k) * width0..(ncols + k + 1) * width0];
            for (b, &w) in bias.iter_mut().zip(row) {
                *b = *b + tk * w;
            }
        }
        // Activations are kept unit-major so every accumulation is a
        // contiguous axpy over the tensor.
        let mut act: Vec<Vec<S>> = bias.iter().map(|&b| vec![b; n]).collect();
        for (c, col) in fm.columns.iter().enumerate() {
            let row = &w0[c * width0..(c + 1) * width0];
            for (a, &w) in act.iter_mut().zip(row) {
                for (a, &x) in a.iter_mut().zip(col) {
                    *a = *a + x * w;
                }
            }
        }
        for (w, b) in &self.theta.layers[1..] {
            for a in act.iter_mut() {
                a.iter_mut().for_each(|x| *x = x.max(S::zero()));
            }
            let out = b.len();
            let mut next: Vec<Vec<S>> = b.iter().map(|&b| vec![b; n]).collect();
            for (k, x) in act.iter().enumerate() {
                for (y, &w) in next.iter_mut().zip(&w[k * out..(k + 1) * out]) {
                    for (y, &x) in y.iter_mut().zip(x) {
                        *y = *y + x * w;
                    }
                }
            }
            act = next;
        }
        let mag = act.pop().expect("two outputs");
        let dir = act.pop().expect("two outputs");
        (dir, mag)
    }

    /// Proposed step for one tensor; the bank must already hold `grad`.
    pub fn tensor_step(
        &self,
        name: &str,
        param: &crate::tensor::Tensor<S>,
        grad: &crate::tensor::Tensor<S>,
        bank: &AccumBank<S>,
        t: u64,
    ) -> Result<Vec<S>> {
        let fm = features_compute(name, param, grad, bank, t, &self.cfg.features)?;
        let (dir, mag) = self.outputs(&fm);
        let l1 = S::of(self.cfg.step_mult);
        let l2 = S::of(self.cfg.exp_mult);
        Ok(dir.iter().zip(&mag).map(|(&d, &m)| l1 * d * (l2 * m).exp()).collect())
    }

    /// `phi' = phi + step_mult * d * exp(exp_mult * m)`, in place.
    pub fn update(&self, params: &mut ParamTree<S>, grads: &ParamTree<S>, state: &mut LOptState<S>) -> Result<()> {
        params.check_congruent(grads)?;
        state.bank.update(grads);
        for ((name, p), g) in params.iter_mut().zip(grads.tensors()) {
            let step = self.tensor_step(name, p, g, &state.bank, state.t)?;
            for (p, d) in p.data_mut().iter_mut().zip(step) {
                *p = *p + d;
            }
        }
        state.t += 1;
        Ok(())
    }
}
