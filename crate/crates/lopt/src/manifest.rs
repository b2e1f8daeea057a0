//! Run manifest, written after every other output of a command. Its
//! presence marks the output directory as complete.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::write_atomic;
use crate::config::config_hash;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Every input needed to rerun the command.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub wallclock_s: f64,
    pub files: Vec<OutputFile>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, master_seed: u64) -> Self {
        Manifest {
            command: command.into(),
            config: serde_json::to_value(config).expect("plain data"),
            config_hash: config_hash(config),
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            master_seed,
            wallclock_s: 0.0,
            files: Vec::new(),
        }
    }

    pub fn file(&mut self, path: &str, schema: &str) {
        self.files.push(OutputFile {
            path: path.into(),
            schema: schema.into(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("plain data");
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
        serde_json::from_str(&text).map_err(Error::json(&path))
    }
}
