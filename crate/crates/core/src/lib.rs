//! Building blocks for learned optimizers and the baselines they are measured
//! against.
//!
//! The crate is `no_std` + `alloc` at its heart. The `std` feature only pulls
//! in the standard library for float math and error traits; `parallel` adds
//! rayon-backed unrolls that reduce in a fixed order, so results never depend
//! on the number of worker threads.
//!
//! Layout:
//! - [`tensor`], [`tree`], [`rng`]: deterministic numeric substrate.
//! - [`tasks`]: MLP training problems with hand-written backprop.
//! - [`handopt`]: SGD, SGDM, Adam, NAdamW and hyperparameter search.
//! - [`accum`]: multi-timescale accumulators and per-parameter features.
//! - [`lopt`]: the per-parameter MLP optimizer and the LSTM Adam controller.
//! - [`metatrain`]: PES meta-training, evaluation, transfer studies.
//! - [`memory`]: exact optimizer state accounting.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod accum;
pub mod error;
pub mod eval;
pub mod handopt;
pub mod lopt;
pub mod memory;
pub mod metatrain;
pub mod optimizer;
mod par;
pub mod rng;
pub mod scalar;
pub mod tasks;
pub mod tensor;
pub mod tree;

pub use error::{Error, Result};
pub use optimizer::{AnyOptimizer, AnyState, Optimizer};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use tree::ParamTree;
