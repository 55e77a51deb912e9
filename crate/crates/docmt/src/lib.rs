//! Document-level machine translation with learned per-sentence context
//! selection.
//!
//! The crate implements two document-translation model families over a small
//! tape-based autodiff core, plus a lightweight predictor that picks, for
//! every source sentence, which surrounding context the translator should
//! condition on:
//!
//! - [`model`] holds the transformer variants. The context-unit variant
//!   encodes source and context in parallel streams and fuses them with
//!   learned per-layer gates; the concatenate variant splices context
//!   around the source sequence and varies decoder depth per option.
//! - [`predictor`] scores the context options. During training the choice
//!   is relaxed with Gumbel-softmax weights so it stays differentiable; at
//!   inference it is a hard argmax.
//! - [`losses`] combines translation NLL with the auxiliary terms that keep
//!   option use diverse and decisions confident.
//! - [`corpus`] covers the document corpus format, vocabulary, context
//!   variant construction and the synthetic benchmark generator.
//! - [`trainer`] implements the two-stage regime: sentence-level
//!   pretraining followed by joint document-level finetuning.
//! - [`eval`] holds BLEU, corpus statistics and translation drivers.

pub mod config_file;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod predictor;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
