//! Files, timing and the command line around `lopt-core`.
//!
//! - [`idx`]: IDX (MNIST-style) dataset files.
//! - [`checkpoint`]: learned-optimizer checkpoints.
//! - [`records`]: CSV result tables.
//! - [`bench`]: step timing and overhead sweeps.
//! - [`config`], [`manifest`], [`train`], [`cli`]: experiment plumbing.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod idx;
pub mod manifest;
pub mod records;
pub mod train;

pub use error::{Error, Result};
