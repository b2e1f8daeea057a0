//! Forward and reverse pass for ReLU MLPs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Batch, LossKind, TaskSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tree::ParamTree;

pub(crate) fn weight_name(layer: usize) -> String {
    format!("layer_{layer}/w")
}

pub(crate) fn bias_name(layer: usize) -> String {
    format!("layer_{layer}/b")
}

/// `out[m×n] = a[m×k] · b[k×n] + bias` (bias broadcast over rows).
fn affine<S: Scalar>(a: &[S], b: &[S], bias: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(m * n);
    for _ in 0..m {
        out.extend_from_slice(bias);
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == S::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &w) in row.iter_mut().zip(brow) {
                *o = *o + x * w;
            }
        }
    }
    out
}

struct Forward<S> {
    /// Post-activation inputs to each layer; `acts[0]` is the batch input.
    acts: Vec<Vec<S>>,
    /// Output-layer pre-activations.
    logits: Vec<S>,
}

fn forward<S: Scalar>(task: &TaskSpec, params: &ParamTree<S>, batch: &Batch<S>) -> Forward<S> {
    let m = batch.size();
    let n_layers = task.layers.len() - 1;
    let mut acts = Vec::with_capacity(n_layers);
    acts.push(batch.inputs.data().to_vec());
    let mut logits = Vec::new();
    for l in 0..n_layers {
        let (k, n) = (task.layers[l], task.layers[l + 1]);
        let w = params.get(&weight_name(l)).expect("weight present").data();
        let b = params.get(&bias_name(l)).expect("bias present").data();
        let mut z = affine(&acts[l], w, b, m, k, n);
        if l + 1 == n_layers {
            logits = z;
        } else {
            for v in z.iter_mut() {
                if *v < S::zero() {
                    *v = S::zero();
                }
            }
            acts.push(z);
        }
    }
    Forward { acts, logits }
}

/// Loss and the gradient of the loss with respect to the logits.
fn head<S: Scalar>(task: &TaskSpec, logits: &[S], batch: &Batch<S>, want_grad: bool) -> (S, Vec<S>) {
    let m = batch.size();
    let n = *task.layers.last().expect("non-empty");
    let inv_m = S::one() / S::of(m as f64);
    match task.loss {
        LossKind::CrossEntropy => {
            let mut total = S::zero();
            let mut grad = if want_grad { vec![S::zero(); m * n] } else { Vec::new() };
            for i in 0..m {
                let row = &logits[i * n..(i + 1) * n];
                let y = batch.targets.data()[i].as_f64() as usize;
                let max = row.iter().copied().fold(S::neg_infinity(), S::max);
                let sum: S = row.iter().map(|&z| (z - max).exp()).sum();
                let lse = max + sum.ln();
                total = total + lse - row[y];
                if want_grad {
                    let g = &mut grad[i * n..(i + 1) * n];
                    for (j, gj) in g.iter_mut().enumerate() {
                        let p = (row[j] - lse).exp();
                        *gj = (p - if j == y { S::one() } else { S::zero() }) * inv_m;
                    }
                }
            }
            (total * inv_m, grad)
        }
        LossKind::MeanSquaredError => {
            let inv = S::one() / S::of((m * n) as f64);
            let two = S::of(2.0);
            let target = batch.targets.data();
            let mut total = S::zero();
            let mut grad = if want_grad {
                Vec::with_capacity(m * n)
            } else {
                Vec::new()
            };
            for (&z, &t) in logits.iter().zip(target) {
                let d = z - t;
                total = total + d * d;
                if want_grad {
                    grad.push(two * d * inv);
                }
            }
            (total * inv, grad)
        }
    }
}

pub(crate) fn loss<S: Scalar>(task: &TaskSpec, params: &ParamTree<S>, batch: &Batch<S>) -> S {
    let fwd = forward(task, params, batch);
    head(task, &fwd.logits, batch, false).0
}

pub(crate) fn loss_and_grad<S: Scalar>(task: &TaskSpec, params: &ParamTree<S>, batch: &Batch<S>) -> (S, ParamTree<S>) {
    let m = batch.size();
    let n_layers = task.layers.len() - 1;
    let fwd = forward(task, params, batch);
    let (loss, mut delta) = head(task, &fwd.logits, batch, true);
    let mut grads = ParamTree::new();
    for l in (0..n_layers).rev() {
        let (k, n) = (task.layers[l], task.layers[l + 1]);
        let a = &fwd.acts[l];
        // dW = aᵀ · delta
        let mut dw = vec![S::zero(); k * n];
        let mut db = vec![S::zero(); n];
        for i in 0..m {
            let drow = &delta[i * n..(i + 1) * n];
            for (b, &d) in db.iter_mut().zip(drow) {
                *b = *b + d;
            }
            for p in 0..k {
                let x = a[i * k + p];
                if x == S::zero() {
                    continue;
                }
                for (g, &d) in dw[p * n..(p + 1) * n].iter_mut().zip(drow) {
                    *g = *g + x * d;
                }
            }
        }
        if l > 0 {
            // delta_prev = (delta · Wᵀ) ⊙ relu'(z); relu'(0) = 0, and a = 0 exactly there.
            let w = params.get(&weight_name(l)).expect("weight present").data();
            let mut prev = vec![S::zero(); m * k];
            for i in 0..m {
                let drow = &delta[i * n..(i + 1) * n];
                for p in 0..k {
                    if a[i * k + p] > S::zero() {
                        let wrow = &w[p * n..(p + 1) * n];
                        prev[i * k + p] = wrow.iter().zip(drow).map(|(&w, &d)| w * d).sum();
                    }
                }
            }
            delta = prev;
        }
        grads.insert(weight_name(l), Tensor::new(vec![k, n], dw).expect("sized"));
        grads.insert(bias_name(l), Tensor::vector(db));
    }
    (loss, grads)
}

pub(crate) fn activation_pattern<S: Scalar>(task: &TaskSpec, params: &ParamTree<S>, batch: &Batch<S>) -> Vec<bool> {
    let fwd = forward(task, params, batch);
    fwd.acts[1..]
        .iter()
        .flat_map(|a| a.iter().map(|&x| x > S::zero()))
        .collect()
}
