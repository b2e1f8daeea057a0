//! CSV result tables. Each schema string is the header line and is
//! recorded in the run manifest.

use std::fs::File;
use std::path::Path;

use lopt_core::handopt::Trial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPISODE_SCHEMA: &str = "meta_step,pair_mean_loss,gnorm,clip_frac,wallclock_s";
pub const TRANSFER_SCHEMA: &str = "meta_step,task,mean_loss,std_loss";
pub const TRIAL_SCHEMA: &str = "trial,seed,cfg_json,mean_loss,diverged";
pub const CURVE_SCHEMA: &str = "step,loss,seed";
pub const BENCH_SCHEMA: &str =
    "optimizer,task,width,batch_size,median_s,std_s,overhead_vs_sgd,state_scalars,state_bytes";
pub const ABLATION_SCHEMA: &str = "preset,seed,meta_loss,overhead_vs_sgd,state_scalars,state_bytes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub meta_step: u64,
    pub pair_mean_loss: f64,
    pub gnorm: f64,
    pub clip_frac: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub cfg_json: String,
    pub mean_loss: f64,
    pub diverged: bool,
}

impl From<&Trial> for TrialRow {
    fn from(t: &Trial) -> Self {
        TrialRow {
            trial: t.trial,
            seed: t.seed,
            cfg_json: serde_json::to_string(&t.config).expect("plain data"),
            mean_loss: t.mean_loss,
            diverged: t.diverged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub optimizer: String,
    pub task: String,
    pub width: usize,
    pub batch_size: usize,
    pub median_s: f64,
    pub std_s: f64,
    pub overhead_vs_sgd: f64,
    pub state_scalars: usize,
    pub state_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub preset: String,
    pub seed: u64,
    pub meta_loss: f64,
    pub overhead_vs_sgd: f64,
    pub state_scalars: usize,
    pub state_bytes: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(schema.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Appends rows one at a time, flushing after each so an interrupted run
/// leaves a readable prefix.
pub struct CsvAppender {
    w: csv::Writer<File>,
}

impl CsvAppender {
    /// Starts the file fresh with `rows` already in it.
    pub fn create<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<Self> {
        write_csv(path, schema, rows)?;
        let file = std::fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(Error::io(path))?;
        Ok(CsvAppender {
            w: csv::WriterBuilder::new().has_headers(false).from_writer(file),
        })
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.w.serialize(row)?;
        self.w.flush().map_err(|e| Error::Csv(e.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_match_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let row = EpisodeRow {
            meta_step: 3,
            pair_mean_loss: 0.1,
            gnorm: 2.0,
            clip_frac: 0.0,
            wallclock_s: 1.5,
        };
        let mut app = CsvAppender::create(&path, EPISODE_SCHEMA, std::slice::from_ref(&row)).unwrap();
        app.push(&row).unwrap();
        drop(app);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), EPISODE_SCHEMA);
        let back: Vec<EpisodeRow> = read_csv(&path).unwrap();
        assert_eq!(back, vec![row.clone(), row]);

        let b = BenchRow {
            optimizer: "sgd".into(),
            task: "t".into(),
            width: 1,
            batch_size: 2,
            median_s: 0.1,
            std_s: 0.0,
            overhead_vs_sgd: 1.0,
            state_scalars: 0,
            state_bytes: 0,
        };
        write_csv(&path, BENCH_SCHEMA, &[b]).unwrap();
        let back: Vec<BenchRow> = read_csv(&path).unwrap();
        assert_eq!(back[0].optimizer, "sgd");
    }

    #[test]
    fn floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let rows: Vec<CurveRow> = (0..50)
            .map(|i| CurveRow {
                step: i,
                loss: (i as f64 + 0.1).ln() / 3.0,
                seed: 7,
            })
            .collect();
        write_csv(&path, CURVE_SCHEMA, &rows).unwrap();
        assert_eq!(read_csv::<CurveRow>(&path).unwrap(), rows);
    }
}
