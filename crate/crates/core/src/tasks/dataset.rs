use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    IdxFile,
}

/// In-memory examples, stored as `f32` regardless of compute precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<f32>,
    feature_dims: Vec<usize>,
    labels: Option<Vec<u32>>,
    num_classes: Option<usize>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        examples: Vec<f32>,
        feature_dims: Vec<usize>,
        labels: Option<Vec<u32>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let feat: usize = feature_dims.iter().product();
        if feat == 0 || !examples.len().is_multiple_of(feat) {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot be split into examples of {:?}",
                examples.len(),
                feature_dims
            )));
        }
        let n = examples.len() / feat;
        let num_classes = match &labels {
            Some(l) if l.len() != n => {
                return Err(Error::ShapeMismatch(format!("{} labels for {} examples", l.len(), n)))
            }
            Some(l) => Some(l.iter().copied().max().map_or(0, |m| m as usize + 1)),
            None => None,
        };
        Ok(Dataset {
            examples,
            feature_dims,
            labels,
            num_classes,
            provenance,
        })
    }

    /// Overrides the class count inferred from the largest label.
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        if let Some(found) = self.num_classes {
            if found > num_classes {
                return Err(Error::InvalidConfig(format!(
                    "labels reach class {} but num_classes is {num_classes}",
                    found - 1
                )));
            }
        }
        self.num_classes = Some(num_classes);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.examples.len() / self.feature_len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_dims(&self) -> &[usize] {
        &self.feature_dims
    }

    pub fn feature_len(&self) -> usize {
        self.feature_dims.iter().product()
    }

    pub fn example(&self, i: usize) -> &[f32] {
        let f = self.feature_len();
        &self.examples[i * f..(i + 1) * f]
    }

    pub fn examples(&self) -> &[f32] {
        &self.examples
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.num_classes
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Gaussian clusters around fixed random class means.
///
/// Labels are assigned round-robin and so are balanced to within one. Means
/// are drawn with standard deviation `spread`; within-class noise is unit
/// variance.
pub fn synth_classification_dataset(
    seed: u64,
    n_examples: usize,
    dim: usize,
    n_classes: usize,
    spread: f64,
) -> Result<Dataset> {
    if n_classes < 2 || dim < 1 || n_examples < 1 {
        return Err(Error::InvalidConfig(format!(
            "synthetic dataset needs n_classes >= 2, dim >= 1, n >= 1 (got {n_classes}, {dim}, {n_examples})"
        )));
    }
    let root = Rng::new(seed);
    let mut means = root.fold_in(0).stream();
    let means: Vec<f64> = (0..n_classes * dim).map(|_| spread * means.normal()).collect();
    let mut noise = root.fold_in(1).stream();
    let mut examples = Vec::with_capacity(n_examples * dim);
    let mut labels = Vec::with_capacity(n_examples);
    for i in 0..n_examples {
        let c = i % n_classes;
        labels.push(c as u32);
        for d in 0..dim {
            examples.push((means[c * dim + d] + noise.normal()) as f32);
        }
    }
    Dataset::new(examples, alloc::vec![dim], Some(labels), Provenance::Synthetic)?.with_num_classes(n_classes)
}
