//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input length {len} exceeds max_positions {max}")]
    InputTooLong { len: usize, max: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    VocabId { id: usize, vocab: usize },

    #[error("invalid context option {option} (model has {n_options} options)")]
    InvalidOption { option: usize, n_options: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no scored target positions")]
    EmptyTarget,

    #[error("{what}: length mismatch ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("training diverged (non-finite loss) at step {step}")]
    Divergence { step: u64 },

    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
