use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use lopt::checkpoint::Checkpoint;
use lopt::cli::{run, Cli};
use lopt::config::MetaTrainConfig;
use lopt::manifest::Manifest;
use lopt::records::{read_csv, CurveRow, EpisodeRow, TrialRow, BENCH_SCHEMA};
use lopt_core::handopt::lr_grid;
use lopt_core::lopt::{LearnedCfg, MlpLOptCfg};
use lopt_core::metatrain::TransferRow;

fn lopt(args: &[&str]) -> lopt::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("lopt").chain(args.iter().copied())).expect("valid args");
    run(cli)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(
        &path,
        r#"{
            "tasks": ["synth_logreg"],
            "pes": {"pairs_per_task": 1, "meta_batch": 2, "sigma": 0.01, "trunc_len": 5, "episode_len": 10},
            "meta_lr": 1e-3,
            "meta_steps": 6,
            "checkpoint_every": 2,
            "seed": 3
        }"#,
    )
    .unwrap();
    path
}

fn file_bytes(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap()
}

fn episode_rows_without_clock(dir: &Path) -> Vec<(u64, u64, u64, u64)> {
    read_csv::<EpisodeRow>(&dir.join("episode_log.csv"))
        .unwrap()
        .into_iter()
        .map(|r| {
            (
                r.meta_step,
                r.pair_mean_loss.to_bits(),
                r.gnorm.to_bits(),
                r.clip_frac.to_bits(),
            )
        })
        .collect()
}

#[test]
fn tune_adam_evaluates_the_grid_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        lopt(&[
            "tune",
            "--task",
            "synth_logreg",
            "--optimizer",
            "adam",
            "--budget",
            "15",
            "--inner-steps",
            "20",
            "--out",
            s(out),
        ])
        .unwrap();
    }
    let trials: Vec<TrialRow> = read_csv(&a.join("trials.csv")).unwrap();
    assert_eq!(trials.len(), 15);
    let lrs: Vec<f64> = trials
        .iter()
        .map(|t| {
            serde_json::from_str::<serde_json::Value>(&t.cfg_json).unwrap()["lr"]
                .as_f64()
                .unwrap()
        })
        .collect();
    assert_eq!(lrs, lr_grid());
    assert_eq!(file_bytes(&a, "trials.csv"), file_bytes(&b, "trials.csv"));
    assert_eq!(
        Manifest::read(&a).unwrap().config_hash,
        Manifest::read(&b).unwrap().config_hash
    );

    let best = a.join("best.json");
    let out = tmp.path().join("eval");
    lopt(&[
        "eval",
        "--optimizer-config",
        s(&best),
        "--task",
        "synth_logreg",
        "--steps",
        "20",
        "--seeds",
        "2",
        "--out",
        s(&out),
    ])
    .unwrap();
    let summary: serde_json::Value = serde_json::from_slice(&file_bytes(&out, "summary.json")).unwrap();
    assert_eq!(summary["optimizer"], "adam");
}

#[test]
fn meta_train_is_deterministic_across_threads_and_resumable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    lopt(&["--threads", "1", "meta-train", "--config", s(&cfg), "--out", s(&one)]).unwrap();
    lopt(&["--threads", "4", "meta-train", "--config", s(&cfg), "--out", s(&four)]).unwrap();
    assert_eq!(episode_rows_without_clock(&one), episode_rows_without_clock(&four));
    let ckpts = lopt::train::list_checkpoints(&one).unwrap();
    assert_eq!(ckpts.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 2, 4, 6]);
    for (step, _) in &ckpts {
        let rel = format!("checkpoints/{}", lopt::train::checkpoint_name(*step));
        assert_eq!(file_bytes(&one, &rel), file_bytes(&four, &rel), "{rel}");
    }
    let m = Manifest::read(&one).unwrap();
    assert_eq!(m.master_seed, 3);
    assert!(m.files.iter().any(|f| f.path == "episode_log.csv"));

    // Interrupted after meta-step 2, then resumed.
    let part = tmp.path().join("part");
    lopt(&[
        "meta-train",
        "--config",
        s(&cfg),
        "--out",
        s(&part),
        "--stop-after",
        "2",
    ])
    .unwrap();
    assert!(!part.join("manifest.json").exists());
    assert_eq!(episode_rows_without_clock(&part).len(), 2);
    lopt(&["meta-train", "--config", s(&cfg), "--out", s(&part)]).unwrap();
    assert!(part.join("manifest.json").exists());
    assert_eq!(episode_rows_without_clock(&part), episode_rows_without_clock(&one));
    for (step, _) in &ckpts {
        let rel = format!("checkpoints/{}", lopt::train::checkpoint_name(*step));
        assert_eq!(file_bytes(&part, &rel), file_bytes(&one, &rel), "{rel}");
    }
}

#[test]
fn corrupt_state_refuses_to_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("run");
    lopt(&["meta-train", "--config", s(&cfg), "--out", s(&out), "--stop-after", "2"]).unwrap();
    let ck = out.join("checkpoints").join(lopt::train::checkpoint_name(2));
    let text = std::fs::read_to_string(&ck).unwrap();
    std::fs::write(&ck, text.replace("\"theta_len\": 197", "\"theta_len\": 196")).unwrap();
    let err = lopt(&["meta-train", "--config", s(&cfg), "--out", s(&out)]).unwrap_err();
    assert!(matches!(err, lopt::Error::CorruptCheckpoint { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);

    std::fs::write(out.join("train_state.json"), "{ not json").unwrap();
    let err = lopt(&["meta-train", "--config", s(&cfg), "--out", s(&out)]).unwrap_err();
    assert!(err.to_string().contains("refusing to resume"), "{err}");
}

#[test]
fn zero_theta_checkpoint_gives_flat_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = tmp.path().join("zero.json");
    let learned = LearnedCfg::Mlp(MlpLOptCfg::default());
    Checkpoint::new(&learned, &vec![0.0; 197]).unwrap().save(&ck).unwrap();
    let out = tmp.path().join("eval");
    lopt(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--task",
        "synth_logreg",
        "--steps",
        "15",
        "--seeds",
        "2",
        "--out",
        s(&out),
    ])
    .unwrap();
    let rows: Vec<CurveRow> = read_csv(&out.join("curves.csv")).unwrap();
    assert_eq!(rows.len(), 30);
    // Parameters never move, so each step scores the initial parameters on
    // that step's minibatch: identical to SGD with a zero learning rate.
    let sgd = tmp.path().join("sgd");
    lopt(&[
        "eval",
        "--optimizer",
        "sgd",
        "--lr",
        "0",
        "--task",
        "synth_logreg",
        "--steps",
        "15",
        "--seeds",
        "2",
        "--out",
        s(&sgd),
    ])
    .unwrap();
    assert_eq!(file_bytes(&out, "curves.csv"), file_bytes(&sgd, "curves.csv"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn eval_defaults_follow_the_protocol() {
    let cli = Cli::try_parse_from(["lopt", "eval", "--optimizer", "adam", "--out", "x"]).unwrap();
    let lopt::cli::Command::Eval(a) = cli.command else {
        panic!()
    };
    assert_eq!(a.steps, 2000);
    assert_eq!(a.seeds, 10);
    let cli = Cli::try_parse_from(["lopt", "bench", "--out", "x"]).unwrap();
    let lopt::cli::Command::Bench(b) = cli.command else {
        panic!()
    };
    assert_eq!(b.batch_sizes, vec![32, 128, 512, 2048]);
    assert_eq!(b.repeats, 10);
    assert!(Cli::try_parse_from(["lopt", "eval", "--out", "x"]).is_err());
    let cfg = MetaTrainConfig::default();
    assert_eq!(
        (cfg.pes.sigma, cfg.pes.trunc_len, cfg.pes.episode_len),
        (0.01, 20, 2000)
    );
}

#[test]
fn bench_table_covers_the_cross_product() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    lopt(&[
        "bench",
        "--optimizers",
        "sgd,adam,small_fc_lopt",
        "--batch-sizes",
        "8,16",
        "--widths",
        "4,8",
        "--repeats",
        "3",
        "--warmup",
        "1",
        "--out",
        s(&out),
    ])
    .unwrap();
    let text = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), BENCH_SCHEMA);
    let rows: Vec<lopt::records::BenchRow> = read_csv(&out.join("bench.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2);
    assert!(rows.iter().all(|r| r.median_s > 0.0 && r.overhead_vs_sgd > 0.0));
    let adam = rows.iter().find(|r| r.optimizer == "adam" && r.width == 4).unwrap();
    // [16,4,4,8] MLP: 16*4+4 + 4*4+4 + 4*8+8 = 128 parameters.
    assert_eq!(adam.state_scalars, 256);
    assert_eq!(adam.state_bytes, 1024);
    let mem: serde_json::Value = serde_json::from_slice(&file_bytes(&out, "memory.json")).unwrap();
    assert_eq!(mem.as_array().unwrap().len(), 6);
}

#[test]
fn transfer_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let run_dir = tmp.path().join("run");
    lopt(&["meta-train", "--config", s(&cfg), "--out", s(&run_dir)]).unwrap();
    let latest = tmp.path().join("latest");
    lopt(&[
        "eval",
        "--checkpoint",
        s(&run_dir),
        "--task",
        "synth_logreg",
        "--steps",
        "5",
        "--seeds",
        "1",
        "--out",
        s(&latest),
    ])
    .unwrap();
    let source = Manifest::read(&latest).unwrap().config["source"].to_string();
    assert!(source.contains("ckpt_00000006.json"), "{source}");
    let out = tmp.path().join("transfer");
    lopt(&[
        "transfer",
        "--checkpoints",
        s(&run_dir),
        "--train-task",
        "synth_logreg",
        "--test-tasks",
        "synth_mlp_c4",
        "--steps",
        "10",
        "--seeds",
        "2",
        "--out",
        s(&out),
    ])
    .unwrap();
    let rows: Vec<TransferRow> = read_csv(&out.join("transfer.csv")).unwrap();
    assert_eq!(rows.len(), 4 * 2);
    let best: serde_json::Value = serde_json::from_slice(&file_bytes(&out, "best.json")).unwrap();
    let step = best["best_meta_step"].as_u64().unwrap();
    let min = rows
        .iter()
        .filter(|r| r.task == "synth_logreg")
        .map(|r| r.mean_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(
        rows.iter()
            .find(|r| r.meta_step == step && r.task == "synth_logreg")
            .unwrap()
            .mean_loss,
        min
    );

    let out = tmp.path().join("budget");
    lopt(&[
        "transfer",
        "--optimizer",
        "nadamw",
        "--budgets",
        "1,3,10",
        "--train-task",
        "synth_logreg",
        "--test-tasks",
        "synth_mlp_c4",
        "--steps",
        "10",
        "--out",
        s(&out),
    ])
    .unwrap();
    let rows: Vec<TransferRow> = read_csv(&out.join("transfer.csv")).unwrap();
    let train: Vec<f64> = rows
        .iter()
        .filter(|r| r.task == "synth_logreg")
        .map(|r| r.mean_loss)
        .collect();
    assert_eq!(train.len(), 3);
    assert!(train.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(read_csv::<TrialRow>(&out.join("trials.csv")).unwrap().len(), 10);
}

#[test]
fn ablate_runs_three_seeds_at_fixed_meta_lr() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("ablate");
    lopt(&[
        "ablate",
        "--preset",
        "m_all",
        "--config",
        s(&cfg),
        "--eval-seeds",
        "2",
        "--out",
        s(&out),
    ])
    .unwrap();
    let rows: Vec<lopt::records::AblationRow> = read_csv(&out.join("ablation.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![3, 4, 5]);
    assert!(rows.iter().all(|r| r.preset == "m_all" && r.meta_loss.is_finite()));
    let used = MetaTrainConfig::load(&out.join("seed_3").join("config.json")).unwrap();
    assert_eq!(used.meta_lr, 1e-4);
    let err = lopt(&["ablate", "--preset", "nope", "--out", s(&out)]).unwrap_err();
    assert!(err.to_string().contains("m_all"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lopt");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let r = code(&["tune", "--optimizer", "rmsprop", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("sgdm") && err.contains("nadamw"), "{err}");

    let r = code(&["tune", "--optimizer", "adam", "--task", "imagenet", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{}").unwrap();
    let r = code(&["eval", "--checkpoint", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("corrupt checkpoint"));

    let r = code(&[
        "tune",
        "--optimizer",
        "sgd",
        "--task",
        "synth_logreg",
        "--budget",
        "2",
        "--inner-steps",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(0));
}
