use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

pub const LSTM_INPUT: usize = 12;
pub const LSTM_HIDDEN: usize = 32;
const GATES: usize = 4 * LSTM_HIDDEN;

/// Weights of a single LSTM cell. Gate columns are ordered input, forget,
/// candidate, output, each `LSTM_HIDDEN` wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmWeights<'a, S> {
    /// `[LSTM_INPUT x 4H]`, row-major.
    pub w_x: &'a [S],
    /// `[LSTM_HIDDEN x 4H]`, row-major.
    pub w_h: &'a [S],
    /// `[4H]`.
    pub b: &'a [S],
}

impl<S: Scalar> LstmWeights<'_, S> {
    pub const NUM_SCALARS: usize = LSTM_INPUT * GATES + LSTM_HIDDEN * GATES + GATES;

    fn preact(&self, x: &[S], h: &[S]) -> Vec<S> {
        let mut z = self.b.to_vec();
        for (k, &xk) in x.iter().enumerate() {
            for (z, &w) in z.iter_mut().zip(&self.w_x[k * GATES..(k + 1) * GATES]) {
                *z = *z + xk * w;
            }
        }
        for (k, &hk) in h.iter().enumerate() {
            for (z, &w) in z.iter_mut().zip(&self.w_h[k * GATES..(k + 1) * GATES]) {
                *z = *z + hk * w;
            }
        }
        z
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// One LSTM step: returns `(h', c')`.
pub fn lstm_cell<S: Scalar>(x: &[S], h: &[S], c: &[S], w: &LstmWeights<'_, S>) -> (Vec<S>, Vec<S>) {
    debug_assert_eq!(x.len(), LSTM_INPUT);
    debug_assert_eq!(h.len(), LSTM_HIDDEN);
    let z = w.preact(x, h);
    let n = LSTM_HIDDEN;
    let mut h2 = vec![S::zero(); n];
    let mut c2 = vec![S::zero(); n];
    for j in 0..n {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[n + j]);
        let g = z[2 * n + j].tanh();
        let o = sigmoid(z[3 * n + j]);
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

/// Directional derivative of [`lstm_cell`] with respect to its weights,
/// along `dw` (same layout as `w`). Returns `(dh', dc')`.
pub fn lstm_cell_jvp<S: Scalar>(
    x: &[S],
    h: &[S],
    c: &[S],
    w: &LstmWeights<'_, S>,
    dw: &LstmWeights<'_, S>,
) -> (Vec<S>, Vec<S>) {
    let z = w.preact(x, h);
    let dz = dw.preact(x, h);
    let n = LSTM_HIDDEN;
    let one = S::one();
    let mut dh = vec![S::zero(); n];
    let mut dc = vec![S::zero(); n];
    for j in 0..n {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[n + j]);
        let g = z[2 * n + j].tanh();
        let o = sigmoid(z[3 * n + j]);
        let di = i * (one - i) * dz[j];
        let df = f * (one - f) * dz[n + j];
        let dg = (one - g * g) * dz[2 * n + j];
        let d_o = o * (one - o) * dz[3 * n + j];
        let c2 = f * c[j] + i * g;
        let tc = c2.tanh();
        dc[j] = df * c[j] + di * g + i * dg;
        dh[j] = d_o * tc + o * (one - tc * tc) * dc[j];
    }
    (dh, dc)
}
