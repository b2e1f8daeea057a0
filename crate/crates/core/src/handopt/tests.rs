use super::*;
use crate::rng::Rng;
use crate::tasks::task_by_name;
use crate::tensor::Tensor;
use alloc::vec;
use alloc::vec::Vec;

fn scalar_tree(x: f64) -> ParamTree<f64> {
    let mut t = ParamTree::new();
    t.insert("x", Tensor::scalar(x));
    t
}

fn get(t: &ParamTree<f64>) -> f64 {
    t.get("x").unwrap().data()[0]
}

/// Runs `steps` updates on a scalar parameter with the given gradients.
fn trace<O: Optimizer<f64>>(opt: &O, phi: f64, grads: &[f64]) -> Vec<f64> {
    let mut p = scalar_tree(phi);
    let mut s = opt.init(&p);
    grads
        .iter()
        .map(|&g| {
            opt.update(&mut p, &scalar_tree(g), &mut s).unwrap();
            get(&p)
        })
        .collect()
}

// Plain scalar re-derivations, kept free of the library's code paths.

fn oracle_adam(phi: f64, grads: &[f64], a: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
    let (mut phi, mut m, mut v) = (phi, 0.0, 0.0);
    let mut out = vec![];
    for (k, &g) in grads.iter().enumerate() {
        let t = (k + 1) as f64;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powf(t));
        let vh = v / (1.0 - b2.powf(t));
        phi -= a * mh / (vh.sqrt() + eps);
        out.push(phi);
    }
    out
}

fn oracle_nadamw(phi: f64, grads: &[f64], c: &NAdamWCfg, total: u64) -> Vec<f64> {
    let (mut phi, mut m, mut v) = (phi, 0.0, 0.0);
    let mut out = vec![];
    for (k, &graw) in grads.iter().enumerate() {
        let lr = oracle_schedule(k as f64, total as f64, c);
        let t = (k + 1) as f64;
        let g = graw + 2.0 * c.l2_wd * phi;
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        let mh = m / (1.0 - c.beta1.powf(t));
        let vh = v / (1.0 - c.beta2.powf(t));
        let u = if c.use_nesterov {
            (c.beta1 * mh + (1.0 - c.beta1) * g) / (vh.sqrt() + c.eps)
        } else {
            mh / (vh.sqrt() + c.eps)
        };
        phi = phi - lr * u - lr * c.l2_adamw * phi;
        out.push(phi);
    }
    out
}

fn oracle_schedule(t: f64, total: f64, c: &NAdamWCfg) -> f64 {
    if c.c_warmup > 0.0 && t < c.c_warmup * total {
        return c.lr_base * t / (c.c_warmup * total);
    }
    let end = total * (1.0 - c.c_constant);
    let phase = if end > 0.0 {
        core::f64::consts::PI * (t / end).min(1.0)
    } else {
        core::f64::consts::PI
    };
    let lo = c.c_min_lr_mult * c.lr_base;
    lo + (c.lr_base - lo) * 0.5 * (1.0 + phase.cos())
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn sgd_examples() {
    let o = Sgd(SgdCfg { lr: 0.1 });
    assert_eq!(trace(&o, 1.0, &[0.5]), vec![0.95]);
    assert_eq!(trace(&o, 1.0, &[0.0, 0.0]), vec![1.0, 1.0]);
    let a = trace(&o, 0.3, &[0.7])[0];
    assert!((a - (0.3 - 0.1 * 0.2 - 0.1 * 0.5)).abs() < 1e-15);
}

#[test]
fn sgdm_examples() {
    let o = Sgdm(SgdmCfg { lr: 0.1, momentum: 0.9 });
    let t = trace(&o, 0.0, &[1.0, 1.0]);
    assert!((t[0] + 0.1).abs() < 1e-15);
    assert!((t[1] - t[0] + 0.19).abs() < 1e-15);
    let mut p = scalar_tree(0.0);
    let mut s = Optimizer::<f64>::init(&o, &p);
    for _ in 0..400 {
        o.update(&mut p, &scalar_tree(2.0), &mut s).unwrap();
    }
    let m = get(s.m.as_ref().unwrap());
    assert!((m - 2.0 / (1.0 - 0.9)).abs() < 1e-9);
}

#[test]
fn adam_examples() {
    let o = Adam(AdamCfg {
        lr: 0.1,
        ..AdamCfg::default()
    });
    let d = trace(&o, 0.0, &[1.0])[0];
    assert!((d + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    assert_eq!(trace(&o, 2.0, &[0.0; 5]), vec![2.0; 5]);
    let mut s = Rng::new(1).stream();
    for _ in 0..200 {
        let g = s.normal() * 10f64.powf(s.uniform_range(-6.0, 3.0));
        let d = trace(&o, 0.0, &[g])[0];
        assert_eq!(d.signum(), -g.signum());
        assert!(d.abs() <= 0.1);
    }
}

#[test]
fn schedule_examples() {
    let mut c = NAdamWCfg::from_adam(&AdamCfg::default());
    c.lr_base = 2.0;
    c.c_min_lr_mult = 0.0;
    assert!((nadamw_schedule(50, 100, &c) - 1.0).abs() < 1e-12);
    c.c_warmup = 0.05;
    assert_eq!(nadamw_schedule(0, 100, &c), 0.0);
    c.c_warmup = 0.0;
    c.c_min_lr_mult = 0.1;
    assert!((nadamw_schedule(99_999, 100_000, &c) - 0.2).abs() < 1e-9);
    c.c_constant = 0.5;
    assert!((nadamw_schedule(60, 100, &c) - 0.2).abs() < 1e-12);
    let mut s = Rng::new(2).stream();
    for i in 0..200 {
        let c = sample_nadamw(&Rng::new(i));
        let t = s.below(1000) as u64;
        let a = nadamw_schedule(t, 1000, &c);
        assert!((a - oracle_schedule(t as f64, 1000.0, &c)).abs() <= 1e-12 * c.lr_base.max(1.0));
        assert!(a >= 0.0 && a <= c.lr_base * (1.0 + 1e-12));
    }
}

#[test]
fn nadamw_examples() {
    let mut c = NAdamWCfg::from_adam(&AdamCfg::default());
    c.use_nesterov = true;
    c.lr_base = 1.0;
    let d = trace(
        &NAdamW {
            cfg: c,
            total_steps: 10,
        },
        0.0,
        &[1.0],
    )[0];
    assert!((d + 1.0 / (1.0 + 1e-8)).abs() < 1e-15);

    let mut c = NAdamWCfg::from_adam(&AdamCfg::default());
    c.l2_adamw = 0.01;
    c.lr_base = 0.3;
    let d = trace(
        &NAdamW {
            cfg: c,
            total_steps: 10,
        },
        2.0,
        &[0.0],
    )[0];
    assert!((d - 2.0 * (1.0 - 0.3 * 0.01)).abs() < 1e-15);
}

#[test]
fn scalar_oracle_equivalence() {
    let mut s = Rng::new(3).stream();
    for case in 0..20u64 {
        let phi = s.normal();
        let grads: Vec<f64> = (0..5).map(|_| s.normal()).collect();
        let lr = s.log_uniform(1e-4, 1.0);
        let mu = s.uniform_range(0.0, 0.99);

        let sgd = trace(&Sgd(SgdCfg { lr }), phi, &grads);
        let mut x = phi;
        let want: Vec<f64> = grads
            .iter()
            .map(|g| {
                x -= lr * g;
                x
            })
            .collect();
        close(&sgd, &want, 1e-12);

        let sgdm = trace(&Sgdm(SgdmCfg { lr, momentum: mu }), phi, &grads);
        let (mut x, mut m) = (phi, 0.0);
        let want: Vec<f64> = grads
            .iter()
            .map(|g| {
                m = mu * m + g;
                x -= lr * m;
                x
            })
            .collect();
        close(&sgdm, &want, 1e-12);

        let a = AdamCfg {
            lr,
            beta1: 1.0 - s.log_uniform(1e-3, 1.0),
            beta2: 1.0 - s.log_uniform(1e-5, 1.0),
            eps: s.log_uniform(1e-8, 1.0),
        };
        close(
            &trace(&Adam(a), phi, &grads),
            &oracle_adam(phi, &grads, a.lr, a.beta1, a.beta2, a.eps),
            1e-12,
        );

        let c = sample_nadamw(&Rng::new(1000 + case));
        close(
            &trace(&NAdamW { cfg: c, total_steps: 8 }, phi, &grads),
            &oracle_nadamw(phi, &grads, &c, 8),
            1e-12,
        );
    }
}

fn tree_trace<O: Optimizer<f64>>(opt: &O, steps: u64) -> Vec<f64> {
    let r = Rng::new(4);
    let mut p = ParamTree::new();
    p.insert("a", r.normal(&[3, 4]));
    p.insert("b", r.fold_in(1).normal(&[4]));
    let mut s = opt.init(&p);
    for k in 0..steps {
        let mut g = ParamTree::new();
        for (i, (name, t)) in p.iter().enumerate() {
            g.insert(name, r.fold_in(100 + k).fold_in(i as u64).normal(t.shape()));
        }
        opt.update(&mut p, &g, &mut s).unwrap();
    }
    p.flatten()
}

#[test]
fn reductions() {
    close(
        &tree_trace(
            &Sgdm(SgdmCfg {
                lr: 0.05,
                momentum: 0.0,
            }),
            100,
        ),
        &tree_trace(&Sgd(SgdCfg { lr: 0.05 }), 100),
        1e-12,
    );
    let a = AdamCfg {
        lr: 0.01,
        ..AdamCfg::default()
    };
    close(
        &tree_trace(
            &NAdamW {
                cfg: NAdamWCfg::from_adam(&a),
                total_steps: 100,
            },
            100,
        ),
        &tree_trace(&Adam(a), 100),
        1e-12,
    );
}

#[test]
fn lr_grid_values() {
    let g = lr_grid();
    assert_eq!(g.len(), 15);
    assert_eq!(g[0], 1e-7);
    assert_eq!(g[14], 1.0);
    for w in g.windows(2) {
        assert!((w[1] / w[0] - 10f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn sampler_statistics() {
    let n = 10_000;
    let (mut wd0, mut adamw0, mut nest, mut both) = (0, 0, 0, 0);
    for i in 0..n {
        let c = sample_nadamw(&Rng::new(77).fold_in(i));
        c.validate().unwrap();
        assert!((1e-5..=1.0).contains(&c.lr_base));
        assert!((0.0..=1.0 - 1e-3).contains(&c.beta1));
        assert!((0.0..=1.0 - 1e-5).contains(&c.beta2));
        assert!((1e-8..=1e4).contains(&c.eps));
        assert!(c.c_warmup == 0.0 || (1e-5..=1e-1).contains(&c.c_warmup));
        assert!(c.c_min_lr_mult == 0.0 || (1e-5..=1.0).contains(&c.c_min_lr_mult));
        assert!((0.0..=1.0).contains(&c.c_constant));
        wd0 += (c.l2_wd == 0.0) as u32;
        adamw0 += (c.l2_adamw == 0.0) as u32;
        both += (c.l2_wd > 0.0 && c.l2_adamw > 0.0) as u32;
        nest += c.use_nesterov as u32;
    }
    let frac = |k: u32| k as f64 / n as f64;
    assert!((frac(wd0) - 1.0 / 3.0).abs() < 0.02);
    assert!((frac(adamw0) - 1.0 / 3.0).abs() < 0.02);
    assert!((frac(both) - 1.0 / 3.0).abs() < 0.02);
    assert!((frac(nest) - 0.5).abs() < 0.02);
}

#[test]
fn random_search_contract() {
    let task = task_by_name("synth_logreg").unwrap();
    let cfg = SearchCfg {
        budget: 1,
        inner_steps: 5,
        seeds_per_trial: 1,
    };
    let r = random_search::<f32>(&task, Family::Nadamw, &cfg, &Rng::new(5)).unwrap();
    assert_eq!(r.trials.len(), 1);
    assert_eq!(r.best, r.trials[0]);

    let cfg = SearchCfg { budget: 8, ..cfg };
    let r = random_search::<f32>(&task, Family::Nadamw, &cfg, &Rng::new(5)).unwrap();
    let b = r.best_so_far();
    assert_eq!(b.len(), 8);
    assert!(b.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*b.last().unwrap(), r.best.mean_loss);

    let r = random_search::<f32>(&task, Family::Adam, &SearchCfg { budget: 100, ..cfg }, &Rng::new(5)).unwrap();
    assert_eq!(r.trials.len(), 15);
    assert!(random_search::<f32>(&task, Family::Sgd, &SearchCfg { budget: 0, ..cfg }, &Rng::new(5)).is_err());
}
