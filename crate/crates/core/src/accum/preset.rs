use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bank::Decays;
use super::features::NUM_TIME_FEATURES;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which feature groups are emitted. Column order is fixed; see
/// [`super::features_compute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFlags {
    pub param: bool,
    pub grad: bool,
    pub momentum: bool,
    pub second_moment: bool,
    /// `m / sqrt(v + eps)`.
    pub momentum_rsqrt_v: bool,
    /// `1 / sqrt(v + eps)`.
    pub rsqrt_v: bool,
    /// `g / sqrt(vhat + eps)` with the factored estimate `vhat`.
    pub adafactor_grad: bool,
    /// Row then column statistics tiled to full shape.
    pub adafactor_tiles: bool,
    /// `1 / sqrt(tile + eps)` of the row then column tiles.
    pub adafactor_rsqrt_tiles: bool,
    /// `m / sqrt(vhat + eps)`.
    pub adafactor_momentum: bool,
    pub time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub preset: String,
    pub momentum_decays: Vec<f64>,
    pub second_moment_decays: Vec<f64>,
    pub adafactor_decays: Vec<f64>,
    pub flags: FeatureFlags,
    /// Added under every reciprocal square root.
    pub eps: f64,
    /// Lower bound on the RMS used for column normalization.
    pub norm_floor: f64,
}

impl FeatureConfig {
    pub fn decays<S: Scalar>(&self) -> Decays<S> {
        let c = |v: &[f64]| v.iter().map(|&x| S::of(x)).collect();
        Decays {
            momentum: c(&self.momentum_decays),
            second_moment: c(&self.second_moment_decays),
            adafactor: c(&self.adafactor_decays),
        }
    }

    pub fn num_decays(&self) -> usize {
        self.momentum_decays.len() + self.second_moment_decays.len() + self.adafactor_decays.len()
    }

    /// Number of `m * rsqrt(v)` products: each momentum with the single
    /// second moment, or index-paired when the counts match.
    pub(crate) fn momentum_v_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.momentum_decays.len(), self.second_moment_decays.len())
    }

    pub(crate) fn momentum_adafactor_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.momentum_decays.len(), self.adafactor_decays.len())
    }

    /// Columns that are RMS-normalized per tensor.
    pub fn num_tensor_features(&self) -> usize {
        let f = &self.flags;
        let (nm, nv, na) = (
            self.momentum_decays.len(),
            self.second_moment_decays.len(),
            self.adafactor_decays.len(),
        );
        let mut n = 0;
        n += f.param as usize + f.grad as usize;
        n += if f.momentum { nm } else { 0 };
        n += if f.second_moment { nv } else { 0 };
        n += if f.momentum_rsqrt_v {
            self.momentum_v_pairs().len()
        } else {
            0
        };
        n += if f.rsqrt_v { nv } else { 0 };
        n += if f.adafactor_grad { na } else { 0 };
        n += if f.adafactor_tiles { 2 * na } else { 0 };
        n += if f.adafactor_rsqrt_tiles { 2 * na } else { 0 };
        n += if f.adafactor_momentum {
            self.momentum_adafactor_pairs().len()
        } else {
            0
        };
        n
    }

    /// Total per-parameter inputs, time features included.
    pub fn num_features(&self) -> usize {
        self.num_tensor_features() + if self.flags.time { NUM_TIME_FEATURES } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_features() == 0 {
            return bad("no features enabled".into());
        }
        for &d in self
            .momentum_decays
            .iter()
            .chain(&self.second_moment_decays)
            .chain(&self.adafactor_decays)
        {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("decay {d} outside (0, 1)"));
            }
        }
        let f = &self.flags;
        let nm = self.momentum_decays.len();
        let nv = self.second_moment_decays.len();
        let na = self.adafactor_decays.len();
        if (f.momentum || f.momentum_rsqrt_v || f.adafactor_momentum) && nm == 0 {
            return bad("momentum features need momentum decays".into());
        }
        if (f.second_moment || f.momentum_rsqrt_v || f.rsqrt_v) && nv == 0 {
            return bad("second-moment features need second-moment decays".into());
        }
        if (f.adafactor_grad || f.adafactor_tiles || f.adafactor_rsqrt_tiles || f.adafactor_momentum) && na == 0 {
            return bad("AdaFactor features need AdaFactor decays".into());
        }
        if f.momentum_rsqrt_v && self.momentum_v_pairs().is_empty() {
            return bad(format!("cannot pair {nm} momenta with {nv} second moments"));
        }
        if f.adafactor_momentum && self.momentum_adafactor_pairs().is_empty() {
            return bad(format!("cannot pair {nm} momenta with {na} AdaFactor decays"));
        }
        if self.eps < 0.0 || self.norm_floor < 0.0 {
            return bad("negative guard".into());
        }
        Ok(())
    }
}

fn pairs(nm: usize, nv: usize) -> Vec<(usize, usize)> {
    if nv == 1 {
        (0..nm).map(|k| (k, 0)).collect()
    } else if nm == nv {
        (0..nm).map(|k| (k, k)).collect()
    } else {
        Vec::new()
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "grads_time_p",
    "m_0.1",
    "m_0.5",
    "m_0.9",
    "m_0.99",
    "m_0.999",
    "m_all",
    "m_mid2",
    "m_mid3",
    "rms_0.1",
    "rms_0.5",
    "rms_0.9",
    "rms_0.99",
    "rms_0.999",
    "rms_all",
    "rms_mid2",
    "rms_mid4",
    "m_rms_0.1",
    "m_rms_0.5",
    "m_rms_0.9",
    "m_rms_0.99",
    "m_rms_0.999",
    "m_rms_all",
    "m_rms_mid2",
    "m_rms_mid4",
    "adafact",
    "adafact_m_mul",
    "union",
    "small_fc_lopt",
];

const ALL5: [f64; 5] = [0.1, 0.5, 0.9, 0.99, 0.999];
const ALL6: [f64; 6] = [0.1, 0.5, 0.9, 0.99, 0.999, 0.9999];
const MID3: [f64; 3] = [0.5, 0.9, 0.99];

/// Feature configuration by catalog name.
pub fn preset(name: &str) -> Result<FeatureConfig> {
    let base = FeatureFlags {
        param: true,
        grad: true,
        time: true,
        ..FeatureFlags::default()
    };
    let momentum = FeatureFlags { momentum: true, ..base };
    let rms = FeatureFlags {
        second_moment: true,
        rsqrt_v: true,
        ..base
    };
    let m_rms = FeatureFlags {
        momentum: true,
        second_moment: true,
        rsqrt_v: true,
        momentum_rsqrt_v: true,
        ..base
    };
    let adafact = FeatureFlags {
        param: true,
        time: true,
        adafactor_grad: true,
        adafactor_tiles: true,
        adafactor_rsqrt_tiles: true,
        ..FeatureFlags::default()
    };
    let all = FeatureFlags {
        param: true,
        grad: true,
        momentum: true,
        second_moment: true,
        momentum_rsqrt_v: true,
        rsqrt_v: true,
        adafactor_grad: true,
        adafactor_tiles: true,
        adafactor_rsqrt_tiles: true,
        adafactor_momentum: true,
        time: true,
    };

    let single = |prefix: &str| -> Option<f64> {
        name.strip_prefix(prefix)
            .and_then(|d| d.parse::<f64>().ok())
            .filter(|d| ALL5.contains(d))
    };

    let (m, v, f, flags): (&[f64], &[f64], &[f64], FeatureFlags) = match name {
        "grads_time_p" => (&[], &[], &[], base),
        "m_all" => (&ALL5, &[], &[], momentum),
        "m_mid2" => (&[0.5, 0.9], &[], &[], momentum),
        "m_mid3" => (&MID3, &[], &[], momentum),
        "rms_all" => (&[], &ALL6, &[], rms),
        "rms_mid2" => (&[], &[0.9, 0.99], &[], rms),
        "rms_mid4" => (&[], &[0.5, 0.9, 0.99, 0.999], &[], rms),
        "m_rms_all" => (&ALL6, &ALL6, &[], m_rms),
        "m_rms_mid2" => (&[0.9, 0.99], &[0.9, 0.99], &[], m_rms),
        "m_rms_mid4" => (&[0.5, 0.9, 0.99, 0.999], &[0.5, 0.9, 0.99, 0.999], &[], m_rms),
        "adafact" => (&[], &[], &ALL6, adafact),
        "adafact_m_mul" => (
            &MID3,
            &[],
            &MID3,
            FeatureFlags {
                momentum: true,
                adafactor_momentum: true,
                ..adafact
            },
        ),
        "union" => (&ALL6, &ALL6, &ALL6, all),
        "small_fc_lopt" => (&MID3, &[0.999], &MID3, all),
        "adams_0.999" => {
            return preset("m_rms_0.999").map(|c| FeatureConfig {
                preset: name.into(),
                ..c
            })
        }
        _ => {
            if let Some(d) = single("m_rms_") {
                return Ok(build(name, &[d], &[d], &[], m_rms));
            } else if let Some(d) = single("m_") {
                return Ok(build(name, &[d], &[], &[], momentum));
            } else if let Some(d) = single("rms_") {
                return Ok(build(name, &[], &[d], &[], rms));
            }
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            });
        }
    };
    Ok(build(name, m, v, f, flags))
}

fn build(name: &str, m: &[f64], v: &[f64], f: &[f64], flags: FeatureFlags) -> FeatureConfig {
    FeatureConfig {
        preset: name.to_string(),
        momentum_decays: m.to_vec(),
        second_moment_decays: v.to_vec(),
        adafactor_decays: f.to_vec(),
        flags,
        eps: 1e-8,
        norm_floor: 1e-6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fc_lopt_has_39_inputs_and_7_decays() {
        let c = preset("small_fc_lopt").unwrap();
        assert_eq!(c.num_tensor_features(), 28);
        assert_eq!(c.num_features(), 39);
        assert_eq!(c.num_decays(), 7);
    }

    #[test]
    fn catalog_decays() {
        assert_eq!(preset("m_all").unwrap().momentum_decays, ALL5.to_vec());
        assert_eq!(preset("rms_all").unwrap().second_moment_decays, ALL6.to_vec());
        let a = preset("adafact_m_mul").unwrap();
        assert_eq!(a.adafactor_decays, MID3.to_vec());
        assert_eq!(a.momentum_decays, MID3.to_vec());
        assert_eq!(preset("m_0.99").unwrap().momentum_decays, [0.99].to_vec());
        assert_eq!(preset("rms_mid4").unwrap().second_moment_decays.len(), 4);
    }

    #[test]
    fn every_catalog_entry_is_valid() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(&c.preset, name);
        }
        assert_eq!(preset("grads_time_p").unwrap().num_features(), 2 + 11);
        assert_eq!(preset("m_rms_0.5").unwrap().num_features(), 6 + 11);
    }

    #[test]
    fn unknown_preset_lists_catalog() {
        match preset("m_0.3") {
            Err(Error::UnknownPreset { valid, .. }) => assert!(valid.iter().any(|v| v == "m_all")),
            other => panic!("{other:?}"),
        }
    }
}
