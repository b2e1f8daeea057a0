use super::*;

fn small_classifier(hidden: &[usize]) -> TaskSpec {
    let data = Arc::new(synth_classification_dataset(2, 256, 6, 4, 1.0).unwrap());
    mlp_classifier_task(data, hidden, 8).unwrap()
}

fn small_autoencoder() -> TaskSpec {
    let data = Arc::new(synth_classification_dataset(3, 256, 6, 3, 1.0).unwrap());
    mlp_autoencoder_task(data, &[5, 3, 5], 8).unwrap()
}

fn max_rel_err(a: &ParamTree<f64>, b: &ParamTree<f64>) -> f64 {
    a.flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| (x - y).abs() / (1e-6 + x.abs() + y.abs()))
        .fold(0.0, f64::max)
}

#[test]
fn layer_construction() {
    let data = Arc::new(synth_classification_dataset(1, 512, 16, 8, 1.0).unwrap());
    let t = mlp_classifier_task(data.clone(), &[32, 32], 64).unwrap();
    assert_eq!(t.layers, vec![16, 32, 32, 8]);
    let lr = mlp_classifier_task(data, &[], 64).unwrap();
    assert_eq!(lr.layers, vec![16, 8]);

    let wide = Arc::new(synth_classification_dataset(1, 256, 784, 10, 1.0).unwrap());
    let fm = mlp_classifier_task(wide.clone(), &DEFAULT_CLASSIFIER_HIDDEN, DEFAULT_BATCH_SIZE).unwrap();
    assert_eq!(fm.layers, vec![784, 128, 128, 10]);
    assert_eq!(fm.next_batch::<f32>(0).inputs.shape(), &[128, 784]);
    let ae = mlp_autoencoder_task(wide, &DEFAULT_AUTOENCODER_HIDDEN, DEFAULT_BATCH_SIZE).unwrap();
    assert_eq!(ae.layers, vec![784, 128, 32, 128, 784]);
}

#[test]
#[allow(clippy::approx_constant)]
fn zero_classifier_loss_is_ln_c() {
    for hidden in [&[][..], &[5][..], &[4, 3][..]] {
        let t = small_classifier(hidden);
        let p: ParamTree<f64> = t.zero_params();
        let loss = t.loss(&p, &t.next_batch(3));
        assert!((loss - 4f64.ln()).abs() < 1e-6, "{loss}");
    }
    let data = Arc::new(synth_classification_dataset(1, 64, 3, 10, 1.0).unwrap());
    let t = mlp_classifier_task(data, &[4], 16).unwrap();
    let loss = t.loss(&t.zero_params::<f64>(), &t.next_batch(0));
    assert!((loss - 2.302585).abs() < 1e-6);
    assert_eq!(t.clip_value(), 10f64.ln());
}

#[test]
fn zero_autoencoder_loss_is_mean_square() {
    let t = small_autoencoder();
    let batch: Batch<f64> = t.next_batch(1);
    let expected = batch.inputs.data().iter().map(|x| x * x).sum::<f64>() / batch.inputs.len() as f64;
    let (loss, grads) = t.loss_and_grad(&t.zero_params(), &batch);
    assert!((loss - expected).abs() < 1e-12);
    // Output bias gradient is -2 * column mean / width when every output is zero.
    let m = batch.size() as f64;
    let d = 6.0;
    let gb = grads.get("layer_3/b").unwrap().data();
    for j in 0..6 {
        let col_mean = (0..batch.size()).map(|i| batch.inputs.data()[i * 6 + j]).sum::<f64>() / m;
        assert!((gb[j] - (-2.0 * col_mean / d)).abs() < 1e-12);
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let tasks = [small_classifier(&[]), small_classifier(&[5, 4]), small_autoencoder()];
    for task in &tasks {
        for draw in 0..5u64 {
            let params: ParamTree<f64> = task.init_params(&Rng::new(100 + draw));
            let batch = task.next_batch(draw);
            let (_, g) = task.loss_and_grad(&params, &batch);
            let check = finite_diff_check(task, &params, &batch, DEFAULT_REL_STEP);
            let err = check.max_rel_err(&g);
            assert!(err <= 1e-4, "{} draw {draw}: {err}", task.name);
            assert!(check.kinked_fraction() <= 0.25, "{}", check.kinked_fraction());
        }
    }
}

#[test]
fn kink_crossings_are_flagged_not_hidden() {
    // With a step far larger than the activation margins every hidden-layer
    // weight probe crosses a ReLU kink; the oracle must report that.
    let task = small_classifier(&[5, 4]);
    let params: ParamTree<f64> = task.init_params(&Rng::new(100));
    let batch = task.next_batch(0);
    let check = finite_diff_check(&task, &params, &batch, 1.0);
    assert!(check.kinked_fraction() > 0.5);
    let tight = finite_diff_check(&task, &params, &batch, 1e-7);
    let (_, g) = task.loss_and_grad(&params, &batch);
    assert_eq!(tight.kinked_fraction(), 0.0);
    assert_eq!(max_rel_err(&g, &tight.grad), tight.max_rel_err(&g));
}

#[test]
fn central_difference_on_square() {
    let g = central_difference(|x| x[0] * x[0], &[3.0], DEFAULT_REL_STEP);
    assert!((g[0] - 6.0).abs() < 1e-6);
}

#[test]
fn central_difference_is_second_order() {
    let f = |x: &[f64]| x[0].sin() * x[0].exp();
    let x: f64 = 0.7;
    let exact = x.cos() * x.exp() + x.sin() * x.exp();
    let e1 = (central_difference(f, &[x], 1e-2)[0] - exact).abs();
    let e2 = (central_difference(f, &[x], 5e-3)[0] - exact).abs();
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn init_statistics() {
    let data = Arc::new(synth_classification_dataset(1, 512, 400, 4, 1.0).unwrap());
    let t = mlp_classifier_task(data, &[300], 32).unwrap();
    let p: ParamTree<f64> = t.init_params(&Rng::new(5));
    assert!(p.get("layer_0/b").unwrap().data().iter().all(|&b| b == 0.0));
    assert!(p.get("layer_1/b").unwrap().data().iter().all(|&b| b == 0.0));
    let w = p.get("layer_0/w").unwrap().data();
    let n = w.len() as f64;
    let std = (w.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let target = 1.0 / 400f64.sqrt();
    assert!((std / target - 1.0).abs() < 0.2, "std {std} target {target}");
    assert!(w.iter().all(|x| x.abs() <= 2.0 * target + 1e-12));
    assert_eq!(p, t.init_params(&Rng::new(5)));
}

#[test]
fn batches_depend_only_on_seed_and_step() {
    let t = small_classifier(&[4]);
    assert_eq!(t.next_batch::<f32>(5), t.next_batch::<f32>(5));
    assert_ne!(t.next_batch::<f32>(0), t.next_batch::<f32>(1));
    assert_ne!(t.next_batch::<f32>(0), t.with_seed(9).next_batch::<f32>(0));
}

#[test]
fn sgd_step_decreases_autoencoder_loss() {
    let t = small_autoencoder();
    let params: ParamTree<f64> = t.init_params(&Rng::new(8));
    let batch = t.next_batch(0);
    let (l0, g) = t.loss_and_grad(&params, &batch);
    let stepped = crate::tree::tree_map(&[&params, &g], |x| x[0] - 1e-2 * x[1]).unwrap();
    assert!(t.loss(&stepped, &batch) < l0);
}

#[test]
fn losses_are_non_negative() {
    for t in [small_classifier(&[3]), small_autoencoder()] {
        for s in 0..5 {
            let p: ParamTree<f64> = t.init_params(&Rng::new(s));
            assert!(t.loss(&p, &t.next_batch(s)) >= 0.0);
        }
    }
}

#[test]
fn invalid_tasks_rejected() {
    let data = Arc::new(synth_classification_dataset(1, 16, 4, 2, 1.0).unwrap());
    assert!(mlp_classifier_task(data.clone(), &[0], 4).is_err());
    assert!(mlp_classifier_task(data.clone(), &[4], 32).is_err());
    let unlabeled = Arc::new(Dataset::new(vec![0.0; 32], vec![4], None, Provenance::Synthetic).unwrap());
    assert!(mlp_classifier_task(unlabeled, &[4], 4).is_err());
}
