//! The `lopt` command line: tune, meta-train, eval, bench, transfer, ablate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lopt_core::eval::{evaluate_optimizer, task_instance};
use lopt_core::handopt::{
    random_search, Adam, AdamCfg, Family, HandConfig, NAdamW, NAdamWCfg, SearchCfg, Sgd, SgdCfg, Sgdm, SgdmCfg,
    SGDM_MOMENTUM,
};
use lopt_core::lopt::LearnedCfg;
use lopt_core::memory::memory_account;
use lopt_core::metatrain::{best_checkpoint, nadamw_budget_transfer, transfer_eval};
use lopt_core::tasks::{task_by_name, TaskSpec};
use lopt_core::{AnyOptimizer, Optimizer, Rng, Scalar};
use serde::Serialize;

use crate::bench::{self, SweepCfg, DEFAULT_BATCH_SIZES, DEFAULT_REPEATS, DEFAULT_WARMUP, SWEEP_REPETITIONS};
use crate::checkpoint::{write_atomic, Checkpoint};
use crate::config::{LearnedSpec, MetaTrainConfig, Precision};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::records::*;
use crate::train::{self, list_checkpoints, remove_if_present, RunOpts};

#[derive(Debug, Parser)]
#[command(
    name = "lopt",
    version,
    about = "Learned optimizers: tuning, meta-training, evaluation, benchmarks"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid or random search over a hand-designed optimizer.
    Tune(TuneArgs),
    /// PES meta-training of a learned optimizer from a JSON config.
    MetaTrain(MetaTrainArgs),
    /// Loss curves of one optimizer over several seeds.
    Eval(EvalArgs),
    /// Step time, overhead relative to SGD, and state memory.
    Bench(BenchArgs),
    /// Checkpoint transfer table, or the NAdamW search-budget simulation.
    Transfer(TransferArgs),
    /// Meta-trains one feature preset over several seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HandName {
    Sgd,
    Sgdm,
    Adam,
    Nadamw,
}

impl HandName {
    fn family(self) -> Family {
        match self {
            HandName::Sgd => Family::Sgd,
            HandName::Sgdm => Family::Sgdm,
            HandName::Adam => Family::Adam,
            HandName::Nadamw => Family::Nadamw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptName {
    Sgd,
    Sgdm,
    Adam,
    Nadamw,
    #[value(name = "small_fc_lopt")]
    SmallFcLopt,
    #[value(name = "nn_adam")]
    NnAdam,
}

impl OptName {
    fn label(self) -> &'static str {
        match self {
            OptName::Sgd => "sgd",
            OptName::Sgdm => "sgdm",
            OptName::Adam => "adam",
            OptName::Nadamw => "nadamw",
            OptName::SmallFcLopt => "small_fc_lopt",
            OptName::NnAdam => "nn_adam",
        }
    }

    /// Hand optimizers at `lr`; learned ones at their meta-initialization.
    fn build<S: Scalar>(self, lr: f64, steps: u64) -> Result<AnyOptimizer<S>> {
        let adam = AdamCfg {
            lr,
            ..AdamCfg::default()
        };
        Ok(match self {
            OptName::Sgd => AnyOptimizer::Sgd(Sgd(SgdCfg { lr })),
            OptName::Sgdm => AnyOptimizer::Sgdm(Sgdm(SgdmCfg {
                lr,
                momentum: SGDM_MOMENTUM,
            })),
            OptName::Adam => AnyOptimizer::Adam(Adam(adam)),
            OptName::Nadamw => AnyOptimizer::NAdamW(NAdamW {
                cfg: NAdamWCfg::from_adam(&adam),
                total_steps: steps,
            }),
            OptName::SmallFcLopt | OptName::NnAdam => {
                let learned = if self == OptName::NnAdam {
                    LearnedCfg::NnAdam
                } else {
                    LearnedSpec::default().resolve()?
                };
                learned.build(&learned.init_theta::<S>(&Rng::new(0))?)?
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, default_value = "synth_mlp")]
    pub task: String,
    #[arg(long, value_enum)]
    pub optimizer: HandName,
    /// Trials; grid families evaluate at most their 15 grid points.
    #[arg(long, default_value_t = 15)]
    pub budget: usize,
    #[arg(long, default_value_t = 2000)]
    pub inner_steps: u64,
    #[arg(long, default_value_t = 1)]
    pub seeds_per_trial: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetaTrainArgs {
    /// JSON config; every key is optional, unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Discard saved state in `--out` instead of resuming from it.
    #[arg(long)]
    pub fresh: bool,
    /// Stop at the first checkpoint at or after this meta-step, leaving a
    /// resumable run.
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["checkpoint", "optimizer", "optimizer_config"]))]
pub struct EvalArgs {
    /// Checkpoint file, or a meta-train output directory for its latest checkpoint
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptName>,
    /// Hand-optimizer config as JSON, e.g. from `tune`'s best.json.
    #[arg(long)]
    pub optimizer_config: Option<PathBuf>,
    /// Learning rate for `--optimizer` hand optimizers.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "synth_mlp")]
    pub task: String,
    #[arg(long, default_value_t = 2000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First evaluation seed; seeds are consecutive.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Task family; only the synthetic MLP is swept.
    #[arg(long, default_value = "synth_mlp", value_parser = ["synth_mlp"])]
    pub task: String,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "sgd,adam,small_fc_lopt,nn_adam"
    )]
    pub optimizers: Vec<OptName>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BATCH_SIZES)]
    pub batch_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Repeat every measurement 5 times and report the spread.
    #[arg(long)]
    pub full: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Checkpoint files or meta-train output directories.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub checkpoints: Vec<PathBuf>,
    /// `nadamw` switches to the search-budget simulation.
    #[arg(long, value_enum)]
    pub optimizer: Option<HandName>,
    #[arg(long, default_value = "synth_mlp")]
    pub train_task: String,
    #[arg(long, value_delimiter = ',', default_value = "synth_mlp_c4,synth_mlp_wide")]
    pub test_tasks: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10,30,100")]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seeds_per_trial: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub preset: String,
    /// Base meta-training config; its learned optimizer, meta-lr and seed
    /// are overridden.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Evaluation seeds for the final meta-loss.
    #[arg(long, default_value_t = 10)]
    pub eval_seeds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub const ABLATION_META_LR: f64 = 1e-4;

impl Error {
    /// 2 for usage and config errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use lopt_core::Error as C;
        match self {
            Error::Usage(_) | Error::Json { .. } => 2,
            Error::Core(C::InvalidConfig(_) | C::UnknownTask { .. } | C::UnknownPreset { .. }) => 2,
            _ => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Usage(format!("--threads: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Tune(a) => match a.precision {
            Precision::F32 => tune::<f32>(&a),
            Precision::F64 => tune::<f64>(&a),
        },
        Command::MetaTrain(a) => meta_train(&a),
        Command::Eval(a) => match a.precision {
            Precision::F32 => eval::<f32>(&a),
            Precision::F64 => eval::<f64>(&a),
        },
        Command::Bench(a) => match a.precision {
            Precision::F32 => bench_cmd::<f32>(&a),
            Precision::F64 => bench_cmd::<f64>(&a),
        },
        Command::Transfer(a) => match a.precision {
            Precision::F32 => transfer::<f32>(&a),
            Precision::F64 => transfer::<f64>(&a),
        },
        Command::Ablate(a) => ablate(&a),
    }
}

/// Creates `out` and drops any stale manifest so an interrupted command
/// never looks complete.
fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    remove_if_present(&out.join(MANIFEST_FILE))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(
        path,
        serde_json::to_string_pretty(value).expect("plain data").as_bytes(),
    )
}

#[derive(Serialize)]
struct TuneInputs<'a> {
    task: &'a str,
    optimizer: &'static str,
    search: SearchCfg,
    seed: u64,
    precision: Precision,
}

fn tune<S: Scalar>(a: &TuneArgs) -> Result<()> {
    let started = Instant::now();
    let task = task_by_name(&a.task)?;
    let family = a.optimizer.family();
    let search = SearchCfg {
        budget: a.budget,
        inner_steps: a.inner_steps,
        seeds_per_trial: a.seeds_per_trial,
    };
    prepare_out(&a.out)?;
    let res = random_search::<S>(&task, family, &search, &Rng::new(a.seed))?;
    let rows: Vec<TrialRow> = res.trials.iter().map(TrialRow::from).collect();
    write_csv(&a.out.join("trials.csv"), TRIAL_SCHEMA, &rows)?;
    write_json(
        &a.out.join("best.json"),
        &serde_json::json!({
            "config": res.best.config,
            "mean_loss": res.best.mean_loss,
            "trial": res.best.trial,
            "seeds": res.seeds,
            "all_diverged": res.all_diverged,
        }),
    )?;
    if res.all_diverged {
        eprintln!("warning: every trial diverged; best.json holds the clip value");
    }
    let inputs = TuneInputs {
        task: &a.task,
        optimizer: family.name(),
        search,
        seed: a.seed,
        precision: a.precision,
    };
    let mut m = Manifest::new("tune", &inputs, a.seed);
    m.file("trials.csv", TRIAL_SCHEMA);
    m.file("best.json", "tune_best/v1");
    m.wallclock_s = started.elapsed().as_secs_f64();
    m.write(&a.out)
}

fn meta_train(a: &MetaTrainArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => MetaTrainConfig::load(p)?,
        None => MetaTrainConfig::default(),
    };
    let opts = RunOpts {
        stop_after: a.stop_after,
        fresh: a.fresh,
    };
    let r = train::meta_train(&cfg, &a.out, &opts)?;
    match (r.resumed_from, r.complete) {
        (Some(s), _) => eprintln!("resumed at meta-step {s}; now at {}", r.meta_step),
        (None, false) => eprintln!("stopped at meta-step {}; rerun to resume", r.meta_step),
        _ => {}
    }
    Ok(())
}

/// Runs one update on a fresh instance so architecture problems surface as
/// an explicit error rather than a clipped curve.
fn check_compatible<S: Scalar>(opt: &AnyOptimizer<S>, what: &str, task: &TaskSpec) -> Result<()> {
    let (inst, mut params) = task_instance::<S>(task, 0);
    let (_, grads) = inst.loss_and_grad(&params, &inst.next_batch(0));
    let mut state = opt.init(&params);
    opt.update(&mut params, &grads, &mut state)
        .map_err(|e| Error::Incompatible(format!("{what} cannot train task `{}`: {e}", task.name)))
}

#[derive(Serialize)]
struct EvalInputs<'a> {
    source: String,
    task: &'a str,
    steps: u64,
    seeds: Vec<u64>,
    precision: Precision,
}

fn eval<S: Scalar>(a: &EvalArgs) -> Result<()> {
    let started = Instant::now();
    let task = task_by_name(&a.task)?;
    let (name, source, opt): (String, String, AnyOptimizer<S>) = if let Some(p) = &a.checkpoint {
        // A meta-train run directory stands for its latest checkpoint.
        let latest;
        let p = if p.is_dir() {
            latest = list_checkpoints(p)?
                .pop()
                .ok_or_else(|| Error::Usage(format!("no checkpoints in {}", p.display())))?
                .1;
            &latest
        } else {
            p
        };
        let (learned, theta) = Checkpoint::load(p)?;
        let theta: Vec<S> = theta.iter().map(|&x| S::of(x as f64)).collect();
        (
            learned.name(),
            format!("checkpoint:{}", p.display()),
            learned.build(&theta)?,
        )
    } else if let Some(p) = &a.optimizer_config {
        let text = std::fs::read_to_string(p).map_err(Error::io(p))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(Error::json(p))?;
        // Accept either a bare config or tune's best.json.
        let cfg: HandConfig = serde_json::from_value(v.get("config").cloned().unwrap_or(v)).map_err(Error::json(p))?;
        cfg.validate()?;
        let name = serde_json::to_value(cfg).expect("plain data")["kind"]
            .as_str()
            .unwrap_or("hand")
            .to_string();
        (
            name,
            serde_json::to_string(&cfg).expect("plain data"),
            cfg.optimizer(a.steps),
        )
    } else {
        let o = a.optimizer.expect("clap enforces one source");
        (
            o.label().into(),
            format!("{}:lr={}", o.label(), a.lr),
            o.build(a.lr, a.steps)?,
        )
    };
    check_compatible(&opt, &name, &task)?;
    prepare_out(&a.out)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let r = evaluate_optimizer(&opt, &task, a.steps, &seeds);
    let rows: Vec<CurveRow> = r
        .curves
        .iter()
        .zip(&seeds)
        .flat_map(|(c, &seed)| {
            c.iter().enumerate().map(move |(k, &loss)| CurveRow {
                step: k as u64,
                loss,
                seed,
            })
        })
        .collect();
    write_csv(&a.out.join("curves.csv"), CURVE_SCHEMA, &rows)?;
    write_json(
        &a.out.join("summary.json"),
        &serde_json::json!({
            "optimizer": name,
            "task": a.task,
            "steps": a.steps,
            "seeds": seeds,
            "per_seed": r.per_seed,
            "mean": r.mean,
            "std": r.std,
            "clip": r.clip,
            "any_diverged": r.any_diverged(),
        }),
    )?;
    let inputs = EvalInputs {
        source,
        task: &a.task,
        steps: a.steps,
        seeds,
        precision: a.precision,
    };
    let mut m = Manifest::new("eval", &inputs, a.seed);
    m.file("curves.csv", CURVE_SCHEMA);
    m.file("summary.json", "eval_summary/v1");
    m.wallclock_s = started.elapsed().as_secs_f64();
    m.write(&a.out)
}

#[derive(Serialize)]
struct BenchInputs {
    task: String,
    optimizers: Vec<&'static str>,
    batch_sizes: Vec<usize>,
    widths: Vec<usize>,
    repeats: usize,
    warmup: usize,
    repetitions: usize,
    precision: Precision,
}

fn bench_cmd<S: Scalar>(a: &BenchArgs) -> Result<()> {
    let started = Instant::now();
    if a.optimizers.is_empty() || a.batch_sizes.is_empty() || a.widths.is_empty() {
        return Err(Error::Usage(
            "bench needs at least one optimizer, batch size and width".into(),
        ));
    }
    let opts: Vec<(String, AnyOptimizer<S>)> = a
        .optimizers
        .iter()
        .map(|o| Ok((o.label().to_string(), o.build(1e-3, 1000)?)))
        .collect::<Result<_>>()?;
    let cfg = SweepCfg {
        batch_sizes: a.batch_sizes.clone(),
        widths: a.widths.clone(),
        repeats: a.repeats,
        warmup: a.warmup,
        repetitions: if a.full { SWEEP_REPETITIONS } else { 1 },
    };
    prepare_out(&a.out)?;
    let rows = bench::sweep(&opts, &cfg)?;
    write_csv(&a.out.join("bench.csv"), BENCH_SCHEMA, &rows)?;
    let mut memory = Vec::new();
    for &w in &a.widths {
        let task = lopt_core::tasks::synth_mlp_task(w, a.batch_sizes[0])?;
        let (_, params) = task_instance::<S>(&task, 0);
        for (name, o) in &opts {
            let acct = memory_account(o, &params)?;
            memory.push(serde_json::json!({
                "optimizer": name,
                "width": w,
                "num_params": params.num_scalars(),
                "per_param_scalars": acct.per_param_scalars,
                "sublinear_scalars": acct.sublinear_scalars,
                "total_scalars": acct.total_scalars,
                "total_bytes": acct.total_bytes,
            }));
        }
    }
    write_json(&a.out.join("memory.json"), &memory)?;
    let inputs = BenchInputs {
        task: a.task.clone(),
        optimizers: a.optimizers.iter().map(|o| o.label()).collect(),
        batch_sizes: cfg.batch_sizes.clone(),
        widths: cfg.widths.clone(),
        repeats: cfg.repeats,
        warmup: cfg.warmup,
        repetitions: cfg.repetitions,
        precision: a.precision,
    };
    let mut m = Manifest::new("bench", &inputs, 0);
    m.file("bench.csv", BENCH_SCHEMA);
    m.file("memory.json", "memory_accounts/v1");
    m.wallclock_s = started.elapsed().as_secs_f64();
    m.write(&a.out)
}

/// Expands run directories into their checkpoints. Bare files without a
/// step in their name are numbered by position.
fn collect_checkpoints(paths: &[PathBuf]) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        if p.is_dir() {
            out.extend(list_checkpoints(p)?);
        } else {
            out.push((train::checkpoint_step(p).unwrap_or(i as u64), p.clone()));
        }
    }
    Ok(out)
}

fn transfer<S: Scalar>(a: &TransferArgs) -> Result<()> {
    let started = Instant::now();
    let train_task = task_by_name(&a.train_task)?;
    let held: Vec<TaskSpec> = a
        .test_tasks
        .iter()
        .map(|t| task_by_name(t))
        .collect::<lopt_core::Result<_>>()?;
    let mut m;
    match a.optimizer {
        Some(HandName::Nadamw) => {
            let search = SearchCfg {
                budget: a.budgets.iter().copied().max().unwrap_or(0),
                inner_steps: a.steps,
                seeds_per_trial: a.seeds_per_trial,
            };
            prepare_out(&a.out)?;
            let (res, rows) = nadamw_budget_transfer::<S>(&train_task, &held, &a.budgets, &search, &Rng::new(a.seed))?;
            write_csv(&a.out.join("transfer.csv"), TRANSFER_SCHEMA, &rows)?;
            let trials: Vec<TrialRow> = res.trials.iter().map(TrialRow::from).collect();
            write_csv(&a.out.join("trials.csv"), TRIAL_SCHEMA, &trials)?;
            let inputs = serde_json::json!({
                "mode": "nadamw_budget",
                "train_task": a.train_task,
                "test_tasks": a.test_tasks,
                "budgets": a.budgets,
                "search": search,
                "seed": a.seed,
                "precision": a.precision,
            });
            m = Manifest::new("transfer", &inputs, a.seed);
            m.file("transfer.csv", TRANSFER_SCHEMA);
            m.file("trials.csv", TRIAL_SCHEMA);
        }
        Some(other) => {
            return Err(Error::Usage(format!(
                "search-budget transfer supports only --optimizer nadamw, got {other:?}"
            )))
        }
        None => {
            let ckpts = collect_checkpoints(&a.checkpoints)?;
            if ckpts.is_empty() {
                return Err(Error::Usage(
                    "transfer needs --checkpoints or --optimizer nadamw".into(),
                ));
            }
            let mut learned: Option<LearnedCfg> = None;
            let mut series = Vec::with_capacity(ckpts.len());
            for (step, path) in &ckpts {
                let (l, theta) = Checkpoint::load(path)?;
                match &learned {
                    Some(prev) if *prev != l => {
                        return Err(Error::Incompatible(format!(
                            "{} has a different architecture than the first checkpoint",
                            path.display()
                        )))
                    }
                    _ => learned = Some(l),
                }
                series.push((*step, theta.iter().map(|&x| S::of(x as f64)).collect::<Vec<S>>()));
            }
            let learned = learned.expect("non-empty");
            let tasks: Vec<TaskSpec> = std::iter::once(train_task.clone()).chain(held).collect();
            let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
            prepare_out(&a.out)?;
            let rows = transfer_eval(&learned, &series, &tasks, a.steps, &seeds)?;
            write_csv(&a.out.join("transfer.csv"), TRANSFER_SCHEMA, &rows)?;
            let best = best_checkpoint(&rows, &train_task.name);
            write_json(&a.out.join("best.json"), &serde_json::json!({ "best_meta_step": best }))?;
            let inputs = serde_json::json!({
                "mode": "checkpoints",
                "checkpoints": ckpts.iter().map(|(s, p)| (s, p.display().to_string())).collect::<Vec<_>>(),
                "train_task": a.train_task,
                "test_tasks": a.test_tasks,
                "steps": a.steps,
                "seeds": seeds,
                "precision": a.precision,
            });
            m = Manifest::new("transfer", &inputs, a.seed);
            m.file("transfer.csv", TRANSFER_SCHEMA);
            m.file("best.json", "transfer_best/v1");
        }
    }
    m.wallclock_s = started.elapsed().as_secs_f64();
    m.write(&a.out)
}

fn ablate(a: &AblateArgs) -> Result<()> {
    let started = Instant::now();
    let base = match &a.config {
        Some(p) => MetaTrainConfig::load(p)?,
        None => MetaTrainConfig::default(),
    };
    let (hidden, depth) = match &base.learned {
        LearnedSpec::Mlp { hidden, depth, .. } => (*hidden, *depth),
        _ => (4, 2),
    };
    let learned = LearnedSpec::Mlp {
        preset: a.preset.clone(),
        hidden,
        depth,
    };
    learned.resolve()?;
    prepare_out(&a.out)?;
    let task = base.task_specs()?.remove(0);
    let eval_seeds: Vec<u64> = (0..a.eval_seeds).collect();
    let mut rows = Vec::new();
    let mut configs = Vec::new();
    for s in 0..a.seeds {
        let cfg = MetaTrainConfig {
            learned: learned.clone(),
            meta_lr: ABLATION_META_LR,
            seed: base.seed + s,
            ..base.clone()
        };
        let dir = a.out.join(format!("seed_{}", cfg.seed));
        let r = train::meta_train(&cfg, &dir, &RunOpts::default())?;
        let l = learned.resolve()?;
        let meta_loss = match cfg.precision {
            Precision::F32 => ablation_loss::<f32>(&l, &r.theta, &task, cfg.pes.episode_len, &eval_seeds)?,
            Precision::F64 => ablation_loss::<f64>(&l, &r.theta, &task, cfg.pes.episode_len, &eval_seeds)?,
        };
        let opt = l.build::<f32>(&r.theta.iter().map(|&x| x as f32).collect::<Vec<_>>())?;
        let sgd = AnyOptimizer::<f32>::Sgd(Sgd(SgdCfg { lr: 1e-3 }));
        let t_sgd = bench::time_step("sgd", &sgd, &task, 0, DEFAULT_REPEATS, DEFAULT_WARMUP);
        let t_opt = bench::time_step(&a.preset, &opt, &task, 0, DEFAULT_REPEATS, DEFAULT_WARMUP);
        let (_, params) = task_instance::<f32>(&task, 0);
        let acct = memory_account(&opt, &params)?;
        rows.push(AblationRow {
            preset: a.preset.clone(),
            seed: cfg.seed,
            meta_loss,
            overhead_vs_sgd: bench::overhead_ratio(t_opt.median_s, t_sgd.median_s)?,
            state_scalars: acct.total_scalars,
            state_bytes: acct.total_bytes,
        });
        configs.push(cfg);
    }
    write_csv(&a.out.join("ablation.csv"), ABLATION_SCHEMA, &rows)?;
    let inputs = serde_json::json!({ "preset": a.preset, "runs": configs, "eval_seeds": eval_seeds });
    let mut m = Manifest::new("ablate", &inputs, base.seed);
    m.file("ablation.csv", ABLATION_SCHEMA);
    m.wallclock_s = started.elapsed().as_secs_f64();
    m.write(&a.out)
}

fn ablation_loss<S: Scalar>(
    learned: &LearnedCfg,
    theta: &[f64],
    task: &TaskSpec,
    steps: u64,
    seeds: &[u64],
) -> Result<f64> {
    let theta: Vec<S> = theta.iter().map(|&x| S::of(x as f32 as f64)).collect();
    let opt = learned.build(&theta)?;
    Ok(evaluate_optimizer(&opt, task, steps, seeds).mean)
}
