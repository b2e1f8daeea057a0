use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadTensor { shape: Vec<usize>, len: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{name}`; valid presets: {}", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },
    #[error("unknown task `{name}`; valid tasks: {}", valid.join(", "))]
    UnknownTask { name: String, valid: Vec<String> },
    #[error("non-finite feature in tensor `{tensor}`, column {column}")]
    NonFiniteFeature { tensor: String, column: usize },
    #[error("theta length {got} does not match expected {expected}")]
    ThetaLength { expected: usize, got: usize },
    #[error("empty loss sequence")]
    EmptyLosses,
    #[error("state accounting mismatch for {optimizer}: analytic {analytic}, enumerated {enumerated}")]
    AccountingMismatch {
        optimizer: String,
        analytic: usize,
        enumerated: usize,
    },
    #[error("baseline time is zero")]
    ZeroBaseline,
}
