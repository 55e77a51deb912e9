//! Scoring and inference-time tooling: corpus BLEU, option selection
//! statistics, full-corpus translation with token accounting, and
//! accuracy against the synthetic generator's ground truth.

pub mod bleu;
pub mod files;
pub mod stats;
pub mod synth_acc;
pub mod translate;

pub use bleu::corpus_bleu;
pub use files::{parse_token_docs, read_scorable_docs, write_hypotheses};
pub use stats::{pooled_empty, select_corpus, selection_stats, SelectionStats};
pub use synth_acc::{satisfying_options, synthetic_accuracy, SynthAccuracy};
pub use translate::{translate_corpus, Policy, TimingReport, TimingRow, TranslateOutcome};
