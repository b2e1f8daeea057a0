use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tree::ParamTree;

/// Decay rates per accumulator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decays<S> {
    pub momentum: Vec<S>,
    pub second_moment: Vec<S>,
    pub adafactor: Vec<S>,
}

impl<S: Scalar> Decays<S> {
    pub fn len(&self) -> usize {
        self.momentum.len() + self.second_moment.len() + self.adafactor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Momentum, then second moment, then AdaFactor decays.
    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.momentum.iter().chain(&self.second_moment).chain(&self.adafactor)
    }

    pub fn cast<T: Scalar>(&self) -> Decays<T> {
        let c = |v: &[S]| v.iter().map(|x| T::of(x.as_f64())).collect();
        Decays {
            momentum: c(&self.momentum),
            second_moment: c(&self.second_moment),
            adafactor: c(&self.adafactor),
        }
    }
}

/// Zero-initialized EMA accumulators, one tree per timescale.
///
/// Factored statistics keep, per tensor and per AdaFactor timescale, a row
/// vector and a column vector under the [`Tensor::factored_dims`]
/// convention, so an `r x c` tensor costs `r + c` scalars per timescale.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumBank<S> {
    pub momentum: Vec<ParamTree<S>>,
    pub second_moment: Vec<ParamTree<S>>,
    pub rows: Vec<ParamTree<S>>,
    pub cols: Vec<ParamTree<S>>,
    pub decays: Decays<S>,
}

impl<S: Scalar> AccumBank<S> {
    pub fn new(params: &ParamTree<S>, decays: Decays<S>) -> Self {
        let zeros = params.zeros_like();
        let mut rows = ParamTree::new();
        let mut cols = ParamTree::new();
        for (name, t) in params.iter() {
            let (r, c) = t.factored_dims();
            rows.insert(name, Tensor::zeros(&[r]));
            cols.insert(name, Tensor::zeros(&[c]));
        }
        AccumBank {
            momentum: (0..decays.momentum.len()).map(|_| zeros.clone()).collect(),
            second_moment: (0..decays.second_moment.len()).map(|_| zeros.clone()).collect(),
            rows: (0..decays.adafactor.len()).map(|_| rows.clone()).collect(),
            cols: (0..decays.adafactor.len()).map(|_| cols.clone()).collect(),
            decays,
        }
    }

    /// Folds one gradient into every accumulator.
    pub fn update(&mut self, grads: &ParamTree<S>) {
        let one = S::one();
        for (name, g) in grads.iter() {
            let g = g.data();
            for (acc, &b) in self.momentum.iter_mut().zip(&self.decays.momentum) {
                let m = acc.get_mut(name).expect("congruent").data_mut();
                for (m, &g) in m.iter_mut().zip(g) {
                    *m = b * *m + (one - b) * g;
                }
            }
            for (acc, &b) in self.second_moment.iter_mut().zip(&self.decays.second_moment) {
                let v = acc.get_mut(name).expect("congruent").data_mut();
                for (v, &g) in v.iter_mut().zip(g) {
                    *v = b * *v + (one - b) * g * g;
                }
            }
            if self.decays.adafactor.is_empty() {
                continue;
            }
            let (nr, nc) = {
                let r = self.rows[0].get(name).expect("congruent").len();
                let c = self.cols[0].get(name).expect("congruent").len();
                (r, c)
            };
            let mut row_mean = alloc::vec![S::zero(); nr];
            let mut col_mean = alloc::vec![S::zero(); nc];
            for i in 0..nr {
                for j in 0..nc {
                    let g2 = g[i * nc + j] * g[i * nc + j];
                    row_mean[i] = row_mean[i] + g2;
                    col_mean[j] = col_mean[j] + g2;
                }
            }
            let inv_c = one / S::of(nc as f64);
            let inv_r = one / S::of(nr as f64);
            for a in 0..self.decays.adafactor.len() {
                let b = self.decays.adafactor[a];
                let r = self.rows[a].get_mut(name).expect("congruent").data_mut();
                for (r, &s) in r.iter_mut().zip(&row_mean) {
                    *r = b * *r + (one - b) * s * inv_c;
                }
                let c = self.cols[a].get_mut(name).expect("congruent").data_mut();
                for (c, &s) in c.iter_mut().zip(&col_mean) {
                    *c = b * *c + (one - b) * s * inv_r;
                }
            }
        }
    }

    /// Scalars held per parameter (full-shape accumulators).
    pub fn per_param_scalars(&self) -> usize {
        self.momentum
            .iter()
            .chain(&self.second_moment)
            .map(ParamTree::num_scalars)
            .sum()
    }

    /// Scalars held in factored row/column statistics.
    pub fn factored_scalars(&self) -> usize {
        self.rows.iter().chain(&self.cols).map(ParamTree::num_scalars).sum()
    }
}

/// Full-shape second-moment estimate `R_i * C_j / max(mean(R), guard)`.
pub fn adafactor_precond<S: Scalar>(rows: &[S], cols: &[S], guard: S) -> Vec<S> {
    let mean = rows.iter().copied().sum::<S>() / S::of(rows.len() as f64);
    let denom = mean.max(guard);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            out.push(if denom > S::zero() { r * c / denom } else { S::zero() });
        }
    }
    out
}
