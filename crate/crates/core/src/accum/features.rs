use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::bank::{adafactor_precond, AccumBank};
use super::preset::FeatureConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tree::ParamTree;

pub const TIME_SCALES: [f64; 11] = [1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4, 3e4, 1e5];
pub const NUM_TIME_FEATURES: usize = TIME_SCALES.len();

/// `tanh(t / x)` for every `x` in [`TIME_SCALES`].
pub fn time_features<S: Scalar>(t: u64) -> [S; NUM_TIME_FEATURES] {
    let t = S::of(t as f64);
    TIME_SCALES.map(|x| (t / S::of(x)).tanh())
}

/// Per-parameter inputs for one tensor.
///
/// `columns` hold the per-tensor RMS-normalized features, each of length
/// `len`; `time` holds the unnormalized time features shared by every
/// element. Logical column `k` of a row is `columns[k]` for
/// `k < columns.len()` and `time[k - columns.len()]` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    pub len: usize,
    pub columns: Vec<Vec<S>>,
    pub time: Vec<S>,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn num_features(&self) -> usize {
        self.columns.len() + self.time.len()
    }

    pub fn row(&self, i: usize) -> Vec<S> {
        self.columns
            .iter()
            .map(|c| c[i])
            .chain(self.time.iter().copied())
            .collect()
    }
}

/// Returns false when the column holds a non-finite value.
fn rms_normalize<S: Scalar>(col: &mut [S], floor: S) -> bool {
    if col.is_empty() {
        return true;
    }
    let ms = col.iter().map(|&x| x * x).sum::<S>() / S::of(col.len() as f64);
    if !ms.is_finite() {
        // Overflow of the square alone is not an error.
        if col.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let big = col.iter().fold(S::zero(), |a, &x| a.max(x.abs()));
        col.iter_mut().for_each(|x| *x = *x / big);
        return rms_normalize(col, floor / big);
    }
    let denom = ms.sqrt().max(floor);
    if denom > S::zero() {
        let inv = S::one() / denom;
        col.iter_mut().for_each(|x| *x = *x * inv);
    }
    true
}

fn lookup<'a, S: Scalar>(trees: &'a [ParamTree<S>], name: &str, k: usize, len: usize) -> Result<&'a [S]> {
    let t = trees[k]
        .get(name)
        .ok_or_else(|| Error::ShapeMismatch(alloc::format!("bank has no tensor `{name}`")))?;
    if t.len() != len {
        return Err(Error::ShapeMismatch(alloc::format!(
            "bank tensor `{name}` has {} scalars, expected {len}",
            t.len()
        )));
    }
    Ok(t.data())
}

/// Assembles the feature matrix for tensor `name`. The bank must already
/// include the current gradient.
///
/// Column order, each group present only when its flag is set:
/// 1. parameter value
/// 2. gradient
/// 3. momenta, one per momentum decay
/// 4. second moments, one per second-moment decay
/// 5. `m / sqrt(v + eps)` per momentum/second-moment pair
/// 6. `1 / sqrt(v + eps)` per second-moment decay
/// 7. `g / sqrt(vhat + eps)` per AdaFactor decay
/// 8. row statistics tiled over columns, then column statistics tiled over
///    rows, per AdaFactor decay
/// 9. `1 / sqrt(tile + eps)` of group 8, same order
/// 10. `m / sqrt(vhat + eps)` per momentum/AdaFactor pair
///
/// Groups 1-10 are divided by `max(rms, norm_floor)` over the tensor; the
/// time features follow unnormalized.
pub fn features_compute<S: Scalar>(
    name: &str,
    param: &Tensor<S>,
    grad: &Tensor<S>,
    bank: &AccumBank<S>,
    t: u64,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix<S>> {
    if param.shape() != grad.shape() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{name}: param {:?} vs grad {:?}",
            param.shape(),
            grad.shape()
        )));
    }
    let n = param.len();
    let (nr, nc) = param.factored_dims();
    let f = &cfg.flags;
    let eps = S::of(cfg.eps);
    let one = S::one();
    let lookup = |trees, k, len| lookup(trees, name, k, len);
    let ms: Vec<&[S]> = (0..bank.momentum.len())
        .map(|k| lookup(&bank.momentum, k, n))
        .collect::<Result<_>>()?;
    let vs: Vec<&[S]> = (0..bank.second_moment.len())
        .map(|k| lookup(&bank.second_moment, k, n))
        .collect::<Result<_>>()?;
    let rows: Vec<&[S]> = (0..bank.rows.len())
        .map(|k| lookup(&bank.rows, k, nr))
        .collect::<Result<_>>()?;
    let cols: Vec<&[S]> = (0..bank.cols.len())
        .map(|k| lookup(&bank.cols, k, nc))
        .collect::<Result<_>>()?;
    let p = param.data();
    let g = grad.data();
    let rsqrt = |x: S| one / (x + eps).sqrt();

    let mut columns: Vec<Vec<S>> = Vec::with_capacity(cfg.num_tensor_features());
    if f.param {
        columns.push(p.to_vec());
    }
    if f.grad {
        columns.push(g.to_vec());
    }
    if f.momentum {
        columns.extend(ms.iter().map(|m| m.to_vec()));
    }
    if f.second_moment {
        columns.extend(vs.iter().map(|v| v.to_vec()));
    }
    let v_rsqrt: Vec<Vec<S>> = if f.momentum_rsqrt_v || f.rsqrt_v {
        vs.iter().map(|v| v.iter().map(|&v| rsqrt(v)).collect()).collect()
    } else {
        Vec::new()
    };
    if f.momentum_rsqrt_v {
        for (k, j) in cfg.momentum_v_pairs() {
            columns.push(ms[k].iter().zip(&v_rsqrt[j]).map(|(&m, &r)| m * r).collect());
        }
    }
    if f.rsqrt_v {
        columns.extend(v_rsqrt);
    }
    let need_vhat = f.adafactor_grad || f.adafactor_momentum;
    let vhat_rsqrt: Vec<Vec<S>> = if need_vhat {
        rows.iter()
            .zip(&cols)
            .map(|(r, c)| adafactor_precond(r, c, S::zero()).into_iter().map(rsqrt).collect())
            .collect()
    } else {
        Vec::new()
    };
    if f.adafactor_grad {
        for vr in &vhat_rsqrt {
            columns.push(g.iter().zip(vr).map(|(&g, &r)| g * r).collect());
        }
    }
    let tile_rows = |r: &[S], map: &dyn Fn(S) -> S| -> Vec<S> {
        let mut out = vec![S::zero(); n];
        for i in 0..nr {
            let x = map(r[i]);
            out[i * nc..(i + 1) * nc].iter_mut().for_each(|o| *o = x);
        }
        out
    };
    let tile_cols = |c: &[S], map: &dyn Fn(S) -> S| -> Vec<S> {
        let row: Vec<S> = c.iter().map(|&x| map(x)).collect();
        let mut out = Vec::with_capacity(n);
        for _ in 0..nr {
            out.extend_from_slice(&row);
        }
        out
    };
    if f.adafactor_tiles {
        columns.extend(rows.iter().map(|r| tile_rows(r, &|x| x)));
        columns.extend(cols.iter().map(|c| tile_cols(c, &|x| x)));
    }
    if f.adafactor_rsqrt_tiles {
        columns.extend(rows.iter().map(|r| tile_rows(r, &rsqrt)));
        columns.extend(cols.iter().map(|c| tile_cols(c, &rsqrt)));
    }
    if f.adafactor_momentum {
        for (k, a) in cfg.momentum_adafactor_pairs() {
            columns.push(ms[k].iter().zip(&vhat_rsqrt[a]).map(|(&m, &r)| m * r).collect());
        }
    }

    let floor = S::of(cfg.norm_floor);
    for (k, col) in columns.iter_mut().enumerate() {
        if !rms_normalize(col, floor) {
            return Err(Error::NonFiniteFeature {
                tensor: name.to_string(),
                column: k,
            });
        }
    }
    let time = if f.time {
        time_features::<S>(t).to_vec()
    } else {
        Vec::new()
    };
    Ok(FeatureMatrix { len: n, columns, time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accum::preset;
    use crate::rng::Rng;

    fn tree(shape: &[usize], seed: u64) -> ParamTree<f64> {
        let mut p = ParamTree::new();
        p.insert("w", Rng::new(seed).normal(shape));
        p
    }

    #[test]
    fn time_feature_values() {
        let z: [f64; 11] = time_features(0);
        assert!(z.iter().all(|&x| x == 0.0));
        let f: [f64; 11] = time_features(1000);
        assert!((f[6] - 0.761594).abs() < 1e-6);
        assert_eq!(f[6], 1f64.tanh());
        let mut prev: [f64; 11] = time_features(0);
        for t in [1, 10, 100, 1000, 10_000, 100_000] {
            let cur: [f64; 11] = time_features(t);
            for k in 0..11 {
                assert!(cur[k] >= prev[k] && cur[k] <= 1.0);
            }
            prev = cur;
        }
    }

    #[test]
    fn zero_history_leaves_only_param_and_time() {
        let cfg = preset("small_fc_lopt").unwrap();
        let p = tree(&[4, 3], 1);
        let g = p.zeros_like();
        let mut bank = crate::accum::AccumBank::new(&p, cfg.decays());
        bank.update(&g);
        let fm = features_compute("w", p.get("w").unwrap(), g.get("w").unwrap(), &bank, 5, &cfg).unwrap();
        assert_eq!(fm.num_features(), 39);
        assert!(fm.columns[0].iter().any(|&x| x != 0.0));
        // rsqrt columns of a zero accumulator are constant 1/sqrt(eps) and
        // normalize to exactly one; every other tensor column is zero.
        let rsqrt_cols = [9usize, 19, 20, 21, 22, 23, 24];
        for (k, col) in fm.columns.iter().enumerate().skip(1) {
            if rsqrt_cols.contains(&k) {
                assert!(col.iter().all(|&x| (x - 1.0).abs() < 1e-12), "column {k}");
            } else {
                assert!(col.iter().all(|&x| x == 0.0), "column {k}");
            }
        }
        assert!(fm.time.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cfg = preset("small_fc_lopt").unwrap();
        let p = tree(&[4, 3], 1);
        let bank = crate::accum::AccumBank::new(&p, cfg.decays());
        let g = Tensor::<f64>::zeros(&[3, 4]);
        assert!(matches!(
            features_compute("w", p.get("w").unwrap(), &g, &bank, 0, &cfg),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn non_finite_feature_names_tensor_and_column() {
        let cfg = preset("small_fc_lopt").unwrap();
        let p = tree(&[4, 3], 1);
        let mut g = p.clone();
        g.get_mut("w").unwrap().data_mut()[2] = f64::NAN;
        let mut bank = crate::accum::AccumBank::new(&p, cfg.decays());
        bank.update(&g);
        match features_compute("w", p.get("w").unwrap(), g.get("w").unwrap(), &bank, 0, &cfg) {
            Err(Error::NonFiniteFeature { tensor, column }) => {
                assert_eq!(tensor, "w");
                assert_eq!(column, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    fn history(shape: &[usize], steps: u64, scale: f64) -> (ParamTree<f64>, AccumBank<f64>, ParamTree<f64>) {
        let cfg = preset("small_fc_lopt").unwrap();
        let p = tree(shape, 1);
        let mut bank = crate::accum::AccumBank::new(&p, cfg.decays());
        let mut g = p.clone();
        for k in 0..steps {
            g = tree(shape, 100 + k).map(|x| scale * x);
            bank.update(&g);
        }
        (p, bank, g)
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn normalized_columns_have_unit_rms() {
        let cfg = preset("small_fc_lopt").unwrap();
        for shape in [&[6usize, 5][..], &[9][..]] {
            let (p, bank, g) = history(shape, 4, 1.0);
            let fm = features_compute("w", p.get("w").unwrap(), g.get("w").unwrap(), &bank, 7, &cfg).unwrap();
            for (k, col) in fm.columns.iter().enumerate() {
                assert!((rms(col) - 1.0).abs() < 1e-5, "column {k}: {}", rms(col));
            }
            let want: [f64; 11] = time_features(7);
            assert_eq!(fm.time, want.to_vec());
            for (x, t) in TIME_SCALES.iter().zip(&fm.time) {
                assert_eq!(*t, (7.0 / x).tanh());
            }
        }
    }

    #[test]
    fn scale_invariance_without_guards() {
        let mut cfg = preset("small_fc_lopt").unwrap();
        cfg.eps = 0.0;
        cfg.norm_floor = 0.0;
        let (p, bank, g) = history(&[6, 5], 5, 1.0);
        let base = features_compute("w", p.get("w").unwrap(), g.get("w").unwrap(), &bank, 3, &cfg).unwrap();
        for c in [1e-3, 1.0, 1e3] {
            let (p, bank, g) = history(&[6, 5], 5, c);
            let fm = features_compute("w", p.get("w").unwrap(), g.get("w").unwrap(), &bank, 3, &cfg).unwrap();
            for (a, b) in base.columns.iter().flatten().zip(fm.columns.iter().flatten()) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-12), "c={c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rank_one_adafactor_exact() {
        let mut s = Rng::new(21).stream();
        for _ in 0..50 {
            let (r, c) = (1 + s.below(8), 1 + s.below(8));
            let u: Vec<f64> = (0..r).map(|_| s.normal()).collect();
            let v: Vec<f64> = (0..c).map(|_| s.normal()).collect();
            let g: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
            let mut p = ParamTree::new();
            p.insert("w", Tensor::zeros(&[r, c]));
            let mut gt = ParamTree::new();
            gt.insert("w", Tensor::new(alloc::vec![r, c], g.clone()).unwrap());
            let beta = 0.9;
            let decays = crate::accum::Decays {
                momentum: alloc::vec![],
                second_moment: alloc::vec![],
                adafactor: alloc::vec![beta],
            };
            let mut bank = crate::accum::AccumBank::new(&p, decays);
            bank.update(&gt);
            let vhat = adafactor_precond(
                bank.rows[0].get("w").unwrap().data(),
                bank.cols[0].get("w").unwrap().data(),
                0.0,
            );
            for (vh, g) in vhat.iter().zip(&g) {
                let want = g * g;
                assert!(
                    (vh / (1.0 - beta) - want).abs() <= 1e-6 * want.max(1e-300),
                    "{vh} vs {want}"
                );
            }
        }
    }

    /// Recomputes every column from the bank by direct indexing, in the
    /// documented order.
    #[test]
    fn column_order_matches_direct_construction() {
        let cfg = preset("small_fc_lopt").unwrap();
        let (nr, nc) = (4, 3);
        let (p, bank, g) = history(&[nr, nc], 3, 1.0);
        let (p, g) = (p.get("w").unwrap().data(), g.get("w").unwrap().data());
        let at = |t: &ParamTree<f64>| t.get("w").unwrap().data().to_vec();
        let m: Vec<Vec<f64>> = bank.momentum.iter().map(at).collect();
        let v = at(&bank.second_moment[0]);
        let rows: Vec<Vec<f64>> = bank.rows.iter().map(at).collect();
        let cols: Vec<Vec<f64>> = bank.cols.iter().map(at).collect();
        let e = cfg.eps;
        let vhat = |a: usize, i: usize, j: usize| {
            let mean = rows[a].iter().sum::<f64>() / nr as f64;
            rows[a][i] * cols[a][j] / mean
        };
        let mut want: Vec<Vec<f64>> = alloc::vec![alloc::vec![]; 28];
        for i in 0..nr {
            for j in 0..nc {
                let k = i * nc + j;
                let mut row = alloc::vec![p[k], g[k], m[0][k], m[1][k], m[2][k], v[k]];
                row.extend((0..3).map(|a| m[a][k] / (v[k] + e).sqrt()));
                row.push(1.0 / (v[k] + e).sqrt());
                row.extend((0..3).map(|a| g[k] / (vhat(a, i, j) + e).sqrt()));
                row.extend((0..3).map(|a| rows[a][i]));
                row.extend((0..3).map(|a| cols[a][j]));
                row.extend((0..3).map(|a| 1.0 / (rows[a][i] + e).sqrt()));
                row.extend((0..3).map(|a| 1.0 / (cols[a][j] + e).sqrt()));
                row.extend((0..3).map(|a| m[a][k] / (vhat(a, i, j) + e).sqrt()));
                for (c, x) in row.into_iter().enumerate() {
                    want[c].push(x);
                }
            }
        }
        let pt = Tensor::new(alloc::vec![nr, nc], p.to_vec()).unwrap();
        let gt = Tensor::new(alloc::vec![nr, nc], g.to_vec()).unwrap();
        let fm = features_compute("w", &pt, &gt, &bank, 0, &cfg).unwrap();
        assert_eq!(fm.columns.len(), 28);
        for (c, (got, raw)) in fm.columns.iter().zip(&want).enumerate() {
            let r = rms(raw).max(cfg.norm_floor);
            for (a, b) in got.iter().zip(raw) {
                assert!((a - b / r).abs() < 1e-12, "column {c}");
            }
        }
    }
}
