//! Meta-training runs on disk: config, episode log, periodic checkpoints
//! and the resumable training state.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lopt_core::metatrain::{LOptProblem, MetaTrainer, TrainState};
use lopt_core::{Rng, Scalar};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{write_atomic, Checkpoint};
use crate::config::{config_hash, MetaTrainConfig, Precision};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::records::{read_csv, CsvAppender, EpisodeRow, EPISODE_SCHEMA};

pub const CONFIG_FILE: &str = "config.json";
pub const EPISODE_LOG: &str = "episode_log.csv";
pub const STATE_FILE: &str = "train_state.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CHECKPOINT_SCHEMA: &str = "checkpoint/v1";
const THETA_INIT_DOMAIN: u64 = 0x7E7A;

pub fn checkpoint_name(meta_step: u64) -> String {
    format!("ckpt_{meta_step:08}.json")
}

/// Meta-step encoded in a checkpoint file name.
pub fn checkpoint_step(path: &Path) -> Option<u64> {
    path.file_name()?
        .to_str()?
        .strip_prefix("ckpt_")?
        .strip_suffix(".json")?
        .parse()
        .ok()
}

/// Checkpoints of a run directory, ascending by meta-step.
pub fn list_checkpoints(run_dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(Error::io(&dir))? {
        let path = entry.map_err(Error::io(&dir))?.path();
        if let Some(step) = checkpoint_step(&path) {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateFile {
    config_hash: String,
    state: TrainState,
}

#[derive(Debug, Clone, Default)]
pub struct RunOpts {
    /// Return after the first checkpoint at or past this meta-step, as if
    /// interrupted.
    pub stop_after: Option<u64>,
    /// Ignore any saved state and start over.
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub meta_step: u64,
    pub theta: Vec<f64>,
    pub resumed_from: Option<u64>,
    pub complete: bool,
}

pub fn meta_train(cfg: &MetaTrainConfig, out: &Path, opts: &RunOpts) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.precision {
        Precision::F32 => meta_train_typed::<f32>(cfg, out, opts),
        Precision::F64 => meta_train_typed::<f64>(cfg, out, opts),
    }
}

pub(crate) fn remove_if_present(path: &Path) -> Result<()> {
    match std::fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path)(e)),
        _ => Ok(()),
    }
}

fn load_state(out: &Path, hash: &str) -> Result<Option<TrainState>> {
    let path = out.join(STATE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let corrupt = |reason: String| Error::CorruptCheckpoint {
        path: path.clone(),
        reason: format!("refusing to resume: {reason}"),
    };
    let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
    let file: StateFile = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if file.config_hash != hash {
        return Err(Error::Incompatible(format!(
            "{} was written by a different config; use a fresh output directory",
            path.display()
        )));
    }
    // The matching checkpoint must exist and agree with the master copy.
    let ck = out.join(CHECKPOINT_DIR).join(checkpoint_name(file.state.meta_step));
    let (_, theta) = Checkpoint::load(&ck)?;
    let master: Vec<f32> = file.state.theta.iter().map(|&x| x as f32).collect();
    if theta.iter().map(|x| x.to_bits()).ne(master.iter().map(|x| x.to_bits())) {
        return Err(corrupt(format!("{} disagrees with the saved state", ck.display())));
    }
    Ok(Some(file.state))
}

fn save_point(
    out: &Path,
    learned: &lopt_core::lopt::LearnedCfg,
    state: &TrainState,
    hash: &str,
    with_state: bool,
) -> Result<()> {
    let theta: Vec<f32> = state.theta.iter().map(|&x| x as f32).collect();
    let ck = out.join(CHECKPOINT_DIR).join(checkpoint_name(state.meta_step));
    Checkpoint::new(learned, &theta)?.save(&ck)?;
    if with_state {
        let file = StateFile {
            config_hash: hash.into(),
            state: state.clone(),
        };
        write_atomic(
            &out.join(STATE_FILE),
            serde_json::to_string(&file).expect("plain data").as_bytes(),
        )?;
    }
    Ok(())
}

fn meta_train_typed<S: Scalar>(cfg: &MetaTrainConfig, out: &Path, opts: &RunOpts) -> Result<RunOutcome> {
    let started = Instant::now();
    let learned = cfg.learned.resolve()?;
    let problem = LOptProblem::<S>::new(learned.clone(), cfg.task_specs()?)?;
    let hash = config_hash(cfg);
    let rng = Rng::new(cfg.seed);
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    remove_if_present(&out.join(MANIFEST_FILE))?;
    write_atomic(
        &out.join(CONFIG_FILE),
        serde_json::to_string_pretty(cfg).expect("plain data").as_bytes(),
    )?;

    let saved = if opts.fresh { None } else { load_state(out, &hash)? };
    let resumed_from = saved.as_ref().map(|s| s.meta_step);
    let mut trainer = match saved {
        Some(state) => MetaTrainer::resume(&problem, cfg.train_cfg(), state, rng)?,
        None => {
            let dir = out.join(CHECKPOINT_DIR);
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
            }
            std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
            let theta = learned.init_theta::<f64>(&rng.fold_in(THETA_INIT_DOMAIN))?;
            let t = MetaTrainer::new(&problem, cfg.train_cfg(), theta, rng)?;
            save_point(out, &learned, t.state(), &hash, true)?;
            t
        }
    };

    let log_path = out.join(EPISODE_LOG);
    let start = trainer.meta_step();
    let kept: Vec<EpisodeRow> = if start > 0 && log_path.exists() {
        read_csv::<EpisodeRow>(&log_path)?
            .into_iter()
            .filter(|r| r.meta_step < start)
            .collect()
    } else {
        Vec::new()
    };
    let clock0 = kept.last().map_or(0.0, |r| r.wallclock_s);
    let mut log = CsvAppender::create(&log_path, EPISODE_SCHEMA, &kept)?;

    while !trainer.done() {
        let rec = trainer.step()?;
        log.push(&EpisodeRow {
            meta_step: rec.meta_step,
            pair_mean_loss: rec.pair_mean_loss,
            gnorm: rec.gnorm,
            clip_frac: rec.clip_frac,
            wallclock_s: clock0 + started.elapsed().as_secs_f64(),
        })?;
        let step = trainer.meta_step();
        if step % cfg.checkpoint_every == 0 || trainer.done() {
            save_point(out, &learned, trainer.state(), &hash, trainer.at_episode_boundary())?;
            if opts.stop_after.is_some_and(|s| step >= s) && !trainer.done() {
                return Ok(RunOutcome {
                    meta_step: step,
                    theta: trainer.theta().to_vec(),
                    resumed_from,
                    complete: false,
                });
            }
        }
    }

    let mut manifest = Manifest::new("meta-train", cfg, cfg.seed);
    manifest.file(CONFIG_FILE, "meta_train_config/v1");
    manifest.file(EPISODE_LOG, EPISODE_SCHEMA);
    for (step, _) in list_checkpoints(out)? {
        manifest.file(
            &format!("{CHECKPOINT_DIR}/{}", checkpoint_name(step)),
            CHECKPOINT_SCHEMA,
        );
    }
    manifest.file(STATE_FILE, "train_state/v1");
    manifest.wallclock_s = clock0 + started.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(RunOutcome {
        meta_step: trainer.meta_step(),
        theta: trainer.theta().to_vec(),
        resumed_from,
        complete: true,
    })
}
