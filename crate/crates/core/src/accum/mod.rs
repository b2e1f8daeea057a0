//! Multi-timescale accumulators and the per-parameter feature pipeline that
//! feeds learned optimizers.

mod bank;
mod features;
mod preset;

pub use bank::{adafactor_precond, AccumBank, Decays};
pub use features::{features_compute, time_features, FeatureMatrix, NUM_TIME_FEATURES, TIME_SCALES};
pub use preset::{preset, FeatureConfig, FeatureFlags, PRESET_NAMES};
