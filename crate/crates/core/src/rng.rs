//! Splittable, value-like randomness.
//!
//! An [`Rng`] is a key: it never mutates. Sampling goes through a [`Stream`]
//! derived from the key, and independent keys come from [`Rng::split`] or
//! [`Rng::fold_in`]. Streams are ChaCha8, so a key produces the same samples
//! on every platform.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `n` child keys, a pure function of `(self, n)`.
    pub fn split(&self, n: usize) -> Vec<Rng> {
        assert!(n >= 1, "split needs n >= 1");
        (0..n as u64).map(|i| self.fold_in(i)).collect()
    }

    /// Child key for `data`; distinct `data` gives independent keys.
    pub fn fold_in(&self, data: u64) -> Rng {
        let base = splitmix64(self.seed ^ splitmix64(self.counter.wrapping_add(0x5851_F42D)));
        Rng {
            seed: splitmix64(base ^ splitmix64(data.wrapping_mul(0xD1B5_4A32_D192_ED03))),
            counter: self.counter.wrapping_add(1),
        }
    }

    pub fn stream(&self) -> Stream {
        let key = splitmix64(self.seed ^ self.counter.rotate_left(32));
        Stream(ChaCha8Rng::seed_from_u64(key))
    }

    /// I.i.d. standard normal tensor.
    pub fn normal<S: Scalar>(&self, shape: &[usize]) -> Tensor<S> {
        let mut stream = self.stream();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| S::of(stream.normal())).collect();
        Tensor::new(shape.to_vec(), data).expect("shape product matches")
    }
}

/// Mutable sample stream derived from an [`Rng`] key.
#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Log-uniform on `[lo, hi]`, both positive.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        use num_traits::Float;
        Float::exp(self.uniform_range(Float::ln(lo), Float::ln(hi)))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    /// Standard normal truncated to `[-2, 2]` by rejection.
    pub fn truncated_normal(&mut self) -> f64 {
        loop {
            let x = self.normal();
            if (-2.0..=2.0).contains(&x) {
                return x;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        Uniform::new(0, n).expect("n > 0").sample(&mut self.0)
    }
}
