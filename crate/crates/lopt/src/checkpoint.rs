//! Learned-optimizer checkpoints: one JSON document holding the architecture
//! and the meta-parameters as base64 of little-endian `f32`.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use lopt_core::accum::FeatureConfig;
use lopt_core::lopt::{LearnedCfg, MlpLOptCfg, LSTM_HIDDEN};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub optimizer_kind: String,
    pub feature_config: Option<FeatureConfig>,
    pub hidden_sizes: Vec<usize>,
    pub theta_len: usize,
    pub theta_b64: String,
    /// Output scales of the MLP optimizer; absent for `nn_adam`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_mults: Option<[f64; 2]>,
}

pub fn encode_theta(theta: &[f32]) -> String {
    let bytes: Vec<u8> = theta.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_theta(b64: &str) -> std::result::Result<Vec<f32>, String> {
    let bytes = STANDARD.decode(b64).map_err(|e| format!("theta_b64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err(format!("theta_b64 holds {} bytes, not a multiple of 4", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl Checkpoint {
    pub fn new(learned: &LearnedCfg, theta: &[f32]) -> Result<Self> {
        if theta.len() != learned.theta_count() {
            return Err(lopt_core::Error::ThetaLength {
                expected: learned.theta_count(),
                got: theta.len(),
            }
            .into());
        }
        let (feature_config, output_mults) = match learned {
            LearnedCfg::Mlp(c) => (Some(c.features.clone()), Some([c.step_mult, c.exp_mult])),
            LearnedCfg::NnAdam => (None, None),
        };
        Ok(Checkpoint {
            format_version: FORMAT_VERSION,
            optimizer_kind: learned.kind().to_string(),
            feature_config,
            hidden_sizes: learned.hidden_sizes(),
            theta_len: theta.len(),
            theta_b64: encode_theta(theta),
            output_mults,
        })
    }

    /// Rebuilds the architecture, checking every field for consistency.
    pub fn learned(&self) -> std::result::Result<LearnedCfg, String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", self.format_version));
        }
        let learned = match self.optimizer_kind.as_str() {
            "mlp_lopt" => {
                let features = self.feature_config.clone().ok_or("mlp_lopt needs feature_config")?;
                let hidden = *self.hidden_sizes.first().ok_or("hidden_sizes is empty")?;
                if self.hidden_sizes.iter().any(|&h| h != hidden) {
                    return Err(format!("unequal hidden_sizes {:?}", self.hidden_sizes));
                }
                let [step_mult, exp_mult] = self.output_mults.ok_or("mlp_lopt needs output_mults")?;
                let cfg = MlpLOptCfg {
                    features,
                    hidden,
                    depth: self.hidden_sizes.len(),
                    step_mult,
                    exp_mult,
                };
                cfg.validate().map_err(|e| e.to_string())?;
                LearnedCfg::Mlp(cfg)
            }
            "nn_adam" => {
                if self.hidden_sizes != [LSTM_HIDDEN] {
                    return Err(format!("nn_adam hidden_sizes must be [{LSTM_HIDDEN}]"));
                }
                LearnedCfg::NnAdam
            }
            other => return Err(format!("unknown optimizer_kind `{other}`")),
        };
        if learned.theta_count() != self.theta_len {
            return Err(format!(
                "theta_len {} does not match the architecture ({})",
                self.theta_len,
                learned.theta_count()
            ));
        }
        Ok(learned)
    }

    pub fn theta(&self) -> std::result::Result<Vec<f32>, String> {
        let theta = decode_theta(&self.theta_b64)?;
        if theta.len() != self.theta_len {
            return Err(format!(
                "theta_b64 decodes to {} values, theta_len is {}",
                theta.len(),
                self.theta_len
            ));
        }
        Ok(theta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    /// Loads and validates; any inconsistency is a [`Error::CorruptCheckpoint`].
    pub fn load(path: &Path) -> Result<(LearnedCfg, Vec<f32>)> {
        let corrupt = |reason: String| Error::CorruptCheckpoint {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        let learned = ck.learned().map_err(corrupt)?;
        let theta = ck.theta().map_err(corrupt)?;
        Ok((learned, theta))
    }
}

/// Writes through a sibling temporary file so readers never see a partial
/// document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(Error::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(Error::io(path))
}
