use alloc::vec::Vec;

use super::{Batch, TaskSpec};
use crate::tree::ParamTree;

/// Default relative step: `h = 1e-3 * (1 + |x|)`.
pub const DEFAULT_REL_STEP: f64 = 1e-3;

/// Central-difference gradient of `f` at `x` with `h_i = rel_step * (1 + |x_i|)`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Finite-difference oracle for [`TaskSpec::loss_and_grad`] on a fixed batch.
/// 64-bit only.
pub fn finite_diff_grad(task: &TaskSpec, params: &ParamTree<f64>, batch: &Batch<f64>, rel_step: f64) -> ParamTree<f64> {
    finite_diff_check(task, params, batch, rel_step).grad
}

/// Finite-difference gradient plus, per coordinate (flattened tree order),
/// whether either probe changed the ReLU activation pattern. Central
/// differences are only second-order accurate where no kink lies inside
/// `[x - h, x + h]`.
#[derive(Debug, Clone)]
pub struct FdCheck {
    pub grad: ParamTree<f64>,
    pub kinked: Vec<bool>,
}

impl FdCheck {
    pub fn kinked_fraction(&self) -> f64 {
        if self.kinked.is_empty() {
            return 0.0;
        }
        self.kinked.iter().filter(|&&k| k).count() as f64 / self.kinked.len() as f64
    }

    /// `max |a - f| / (1e-6 + |a| + |f|)` over coordinates whose probes
    /// stayed on one side of every kink.
    pub fn max_rel_err(&self, analytic: &ParamTree<f64>) -> f64 {
        analytic
            .flatten()
            .iter()
            .zip(self.grad.flatten())
            .zip(&self.kinked)
            .filter(|(_, &k)| !k)
            .map(|((a, f), _)| (a - f).abs() / (1e-6 + a.abs() + f.abs()))
            .fold(0.0, f64::max)
    }
}

pub fn finite_diff_check(task: &TaskSpec, params: &ParamTree<f64>, batch: &Batch<f64>, rel_step: f64) -> FdCheck {
    let base_pattern = task.activation_pattern(params, batch);
    let mut kinked = Vec::with_capacity(params.num_scalars());
    let mut probe = params.clone();
    let mut out = params.zeros_like();
    let names: Vec<_> = params.names().map(alloc::string::String::from).collect();
    for name in &names {
        let n = params.get(name).expect("present").len();
        for i in 0..n {
            let x = params.get(name).expect("present").data()[i];
            let h = rel_step * (1.0 + x.abs());
            probe.get_mut(name).expect("present").data_mut()[i] = x + h;
            let up = task.loss(&probe, batch);
            let mut crossed = task.activation_pattern(&probe, batch) != base_pattern;
            probe.get_mut(name).expect("present").data_mut()[i] = x - h;
            let down = task.loss(&probe, batch);
            crossed |= task.activation_pattern(&probe, batch) != base_pattern;
            kinked.push(crossed);
            probe.get_mut(name).expect("present").data_mut()[i] = x;
            out.get_mut(name).expect("present").data_mut()[i] = (up - down) / (2.0 * h);
        }
    }
    FdCheck { grad: out, kinked }
}
