use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named tensors, iterated in lexicographic name order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamTree<S> {
    tensors: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> ParamTree<S> {
    pub fn new() -> Self {
        ParamTree {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.tensors.values()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.tensors.values_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamTree {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.zeros_like())).collect(),
        }
    }

    /// Same names, same shapes.
    pub fn congruent(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((ka, a), (kb, b))| ka == kb && a.shape() == b.shape())
    }

    pub fn check_congruent(&self, other: &Self) -> Result<()> {
        if self.congruent(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "trees differ: {:?} vs {:?}",
                self.signature(),
                other.signature()
            )))
        }
    }

    fn signature(&self) -> Vec<(&str, &[usize])> {
        self.iter().map(|(k, t)| (k, t.shape())).collect()
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        ParamTree {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.map(&f))).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for t in self.tensors.values() {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn cast<T: Scalar>(&self) -> ParamTree<T> {
        ParamTree {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }
}

impl<S: Scalar> FromIterator<(String, Tensor<S>)> for ParamTree<S> {
    fn from_iter<I: IntoIterator<Item = (String, Tensor<S>)>>(iter: I) -> Self {
        ParamTree {
            tensors: iter.into_iter().collect(),
        }
    }
}

/// Applies `f` elementwise across one or more congruent trees. `f` receives
/// the aligned scalars, one per input tree, in argument order.
pub fn tree_map<S: Scalar>(trees: &[&ParamTree<S>], f: impl Fn(&[S]) -> S) -> Result<ParamTree<S>> {
    let (first, rest) = trees
        .split_first()
        .ok_or_else(|| Error::ShapeMismatch("tree_map needs at least one tree".into()))?;
    for t in rest {
        first.check_congruent(t)?;
    }
    let mut args = Vec::with_capacity(trees.len());
    let mut out = ParamTree::new();
    for (name, tensor) in first.iter() {
        let others: Vec<&[S]> = rest.iter().map(|t| t.tensors[name].data()).collect();
        let data = tensor
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                args.clear();
                args.push(x);
                args.extend(others.iter().map(|o| o[i]));
                f(&args)
            })
            .collect();
        out.insert(name, Tensor::new(tensor.shape().to_vec(), data)?);
    }
    Ok(out)
}
