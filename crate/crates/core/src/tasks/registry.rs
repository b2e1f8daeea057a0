//! Named desk-scale tasks built from synthetic data.

use alloc::string::ToString;
use alloc::sync::Arc;

use super::{mlp_autoencoder_task, mlp_classifier_task, synth_classification_dataset, TaskSpec};
use crate::error::{Error, Result};

pub const TASK_NAMES: &[&str] = &[
    "synth_mlp",
    "synth_mlp_wide",
    "synth_mlp_c4",
    "synth_logreg",
    "synth_ae",
];

/// The meta-training workhorse: 8 classes, 16 features, hidden `[width, width]`.
pub fn synth_mlp_task(width: usize, batch_size: usize) -> Result<TaskSpec> {
    let data = Arc::new(synth_classification_dataset(0, 8192, 16, 8, 1.0)?);
    let name = if width == 32 && batch_size == 64 {
        "synth_mlp".to_string()
    } else {
        alloc::format!("synth_mlp_w{width}_b{batch_size}")
    };
    Ok(mlp_classifier_task(data, &[width, width], batch_size)?.named(name))
}

pub fn task_by_name(name: &str) -> Result<TaskSpec> {
    match name {
        "synth_mlp" => synth_mlp_task(32, 64),
        "synth_mlp_wide" => {
            let data = Arc::new(synth_classification_dataset(0, 8192, 16, 8, 1.0)?);
            Ok(mlp_classifier_task(data, &[128, 128], 64)?.named(name))
        }
        "synth_mlp_c4" => {
            let data = Arc::new(synth_classification_dataset(11, 8192, 32, 4, 0.7)?);
            Ok(mlp_classifier_task(data, &[64], 32)?.named(name))
        }
        "synth_logreg" => {
            let data = Arc::new(synth_classification_dataset(5, 4096, 16, 8, 1.0)?);
            Ok(mlp_classifier_task(data, &[], 64)?.named(name))
        }
        "synth_ae" => {
            let data = Arc::new(synth_classification_dataset(7, 8192, 16, 8, 1.0)?);
            Ok(mlp_autoencoder_task(data, &[32, 8, 32], 64)?.named(name))
        }
        _ => Err(Error::UnknownTask {
            name: name.to_string(),
            valid: TASK_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}
