//! Document data model, vocabulary, context-variant construction, source
//! masking and the synthetic corpus generator.

pub mod io;
pub mod masking;
pub mod synth;
pub mod variants;
pub mod vocab;

pub use io::{
    read_corpus, read_labels, write_corpus, write_labels, Document, DocumentCorpus, NeedLabel,
    NeedLabels, SentencePair,
};
pub use variants::{build_variants, ContextVariant};
pub use vocab::Vocab;
