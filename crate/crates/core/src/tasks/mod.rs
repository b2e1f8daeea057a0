//! Training problems: initializer, batch stream, loss and gradient.

mod dataset;
mod fd;
mod mlp;
mod registry;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use dataset::{synth_classification_dataset, Dataset, Provenance};
pub use fd::{central_difference, finite_diff_check, finite_diff_grad, FdCheck, DEFAULT_REL_STEP};
pub use registry::{synth_mlp_task, task_by_name, TASK_NAMES};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tree::ParamTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// One mini-batch. For classification `targets` holds class indices as
/// scalars; for autoencoding it is a copy of `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<S> {
    pub inputs: Tensor<S>,
    pub targets: Tensor<S>,
}

impl<S: Scalar> Batch<S> {
    pub fn size(&self) -> usize {
        self.inputs.shape()[0]
    }
}

/// An MLP training problem over a shared dataset.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
    pub dataset: Arc<Dataset>,
    pub batch_size: usize,
    pub num_classes: Option<usize>,
    /// Seeds the batch stream.
    pub seed: u64,
}

pub fn mlp_classifier_task(dataset: Arc<Dataset>, hidden: &[usize], batch_size: usize) -> Result<TaskSpec> {
    let classes = dataset
        .num_classes()
        .filter(|_| dataset.labels().is_some())
        .ok_or_else(|| Error::InvalidConfig("classifier task needs labels".into()))?;
    let mut layers = vec![dataset.feature_len()];
    layers.extend_from_slice(hidden);
    layers.push(classes);
    TaskSpec::new(
        format!("mlp_classifier{:?}", hidden),
        layers,
        LossKind::CrossEntropy,
        dataset,
        batch_size,
        Some(classes),
    )
}

pub fn mlp_autoencoder_task(dataset: Arc<Dataset>, hidden: &[usize], batch_size: usize) -> Result<TaskSpec> {
    let d = dataset.feature_len();
    let mut layers = vec![d];
    layers.extend_from_slice(hidden);
    layers.push(d);
    TaskSpec::new(
        format!("mlp_autoencoder{:?}", hidden),
        layers,
        LossKind::MeanSquaredError,
        dataset,
        batch_size,
        None,
    )
}

pub const DEFAULT_CLASSIFIER_HIDDEN: [usize; 2] = [128, 128];
pub const DEFAULT_AUTOENCODER_HIDDEN: [usize; 3] = [128, 32, 128];
pub const DEFAULT_BATCH_SIZE: usize = 128;

impl TaskSpec {
    pub fn new(
        name: String,
        layers: Vec<usize>,
        loss: LossKind,
        dataset: Arc<Dataset>,
        batch_size: usize,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {layers:?}")));
        }
        if batch_size == 0 || dataset.len() < batch_size {
            return Err(Error::InvalidConfig(format!(
                "batch size {batch_size} with {} examples",
                dataset.len()
            )));
        }
        if layers[0] != dataset.feature_len() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} vs feature length {}",
                layers[0],
                dataset.feature_len()
            )));
        }
        match loss {
            LossKind::CrossEntropy => {
                if dataset.labels().is_none() || num_classes != Some(layers[layers.len() - 1]) {
                    return Err(Error::InvalidConfig(
                        "cross-entropy needs labels and an output per class".into(),
                    ));
                }
            }
            LossKind::MeanSquaredError => {
                if layers[layers.len() - 1] != layers[0] {
                    return Err(Error::InvalidConfig(
                        "reconstruction output must match input width".into(),
                    ));
                }
            }
        }
        Ok(TaskSpec {
            name,
            layers,
            activation: Activation::Relu,
            loss,
            dataset,
            batch_size,
            num_classes,
            seed: 0,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut t = self.clone();
        t.seed = seed;
        t
    }

    pub fn with_batch_size(&self, batch_size: usize) -> Result<Self> {
        let mut t = self.clone();
        if batch_size == 0 || t.dataset.len() < batch_size {
            return Err(Error::InvalidConfig(format!("batch size {batch_size}")));
        }
        t.batch_size = batch_size;
        Ok(t)
    }

    pub fn num_params(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Loss clip used by the meta-objective: `ln(C)` for classification,
    /// the measured step-0 loss for reconstruction.
    pub fn clip_value(&self) -> f64 {
        match (self.loss, self.num_classes) {
            (LossKind::CrossEntropy, Some(c)) => Float::ln(c as f64),
            _ => {
                let params: ParamTree<f64> = self.init_params(&Rng::new(self.seed).fold_in(1));
                let (loss, _) = self.loss_and_grad(&params, &self.next_batch(0));
                loss
            }
        }
    }

    /// Truncated-normal weights (cut at two standard deviations) with
    /// standard deviation `1/sqrt(fan_in)`; zero biases.
    pub fn init_params<S: Scalar>(&self, rng: &Rng) -> ParamTree<S> {
        let mut tree = ParamTree::new();
        for (i, w) in self.layers.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / Float::sqrt(fan_in as f64);
            let mut s = rng.fold_in(i as u64).stream();
            let data = (0..fan_in * fan_out)
                .map(|_| S::of(scale * s.truncated_normal()))
                .collect();
            tree.insert(
                mlp::weight_name(i),
                Tensor::new(vec![fan_in, fan_out], data).expect("sized"),
            );
            tree.insert(mlp::bias_name(i), Tensor::zeros(&[fan_out]));
        }
        tree
    }

    /// Batch for `step`, sampled with replacement; a pure function of
    /// `(seed, step)`.
    pub fn next_batch<S: Scalar>(&self, step: u64) -> Batch<S> {
        let mut s = Rng::new(self.seed).fold_in(0xBA7C).fold_in(step).stream();
        let n = self.dataset.len();
        let f = self.dataset.feature_len();
        let b = self.batch_size;
        let mut inputs = Vec::with_capacity(b * f);
        let mut labels = Vec::with_capacity(b);
        for _ in 0..b {
            let i = s.below(n);
            inputs.extend(self.dataset.example(i).iter().map(|&x| S::of(x as f64)));
            if let Some(l) = self.dataset.labels() {
                labels.push(S::of(l[i] as f64));
            }
        }
        let inputs = Tensor::new(vec![b, f], inputs).expect("sized");
        let targets = match self.loss {
            LossKind::CrossEntropy => Tensor::vector(labels),
            LossKind::MeanSquaredError => inputs.clone(),
        };
        Batch { inputs, targets }
    }

    /// Mean loss over the batch and its gradient. A non-finite loss is
    /// returned as-is; callers check `loss.is_finite()`.
    pub fn loss_and_grad<S: Scalar>(&self, params: &ParamTree<S>, batch: &Batch<S>) -> (S, ParamTree<S>) {
        mlp::loss_and_grad(self, params, batch)
    }

    pub fn loss<S: Scalar>(&self, params: &ParamTree<S>, batch: &Batch<S>) -> S {
        mlp::loss(self, params, batch)
    }

    /// Sign pattern (`z > 0`) of every hidden pre-activation on `batch`.
    pub fn activation_pattern<S: Scalar>(&self, params: &ParamTree<S>, batch: &Batch<S>) -> Vec<bool> {
        mlp::activation_pattern(self, params, batch)
    }

    pub fn check_params<S: Scalar>(&self, params: &ParamTree<S>) -> Result<()> {
        self.zero_params::<S>().check_congruent(params)
    }

    pub fn zero_params<S: Scalar>(&self) -> ParamTree<S> {
        let mut tree = ParamTree::new();
        for (i, w) in self.layers.windows(2).enumerate() {
            tree.insert(mlp::weight_name(i), Tensor::zeros(&[w[0], w[1]]));
            tree.insert(mlp::bias_name(i), Tensor::zeros(&[w[1]]));
        }
        tree
    }
}

#[cfg(test)]
mod tests;
