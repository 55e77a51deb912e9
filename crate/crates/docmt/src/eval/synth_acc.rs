//! Accuracy of hypotheses and option selections against the synthetic
//! generator's ground truth.

use crate::corpus::io::{DocumentCorpus, NeedLabel, NeedLabels};
use crate::corpus::synth::Lexicon;
use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};
use crate::model::config::Variant;

/// Token accuracies plus selection agreement. Totals of zero leave the
/// corresponding rate undefined (NaN).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthAccuracy {
    pub ambiguous_correct: usize,
    pub ambiguous_total: usize,
    pub overall_correct: usize,
    pub overall_total: usize,
    pub agreement_correct: usize,
    pub agreement_total: usize,
}

impl SynthAccuracy {
    pub fn ambiguous_accuracy(&self) -> f64 {
        rate(self.ambiguous_correct, self.ambiguous_total)
    }

    pub fn overall_accuracy(&self) -> f64 {
        rate(self.overall_correct, self.overall_total)
    }

    pub fn agreement(&self) -> f64 {
        rate(self.agreement_correct, self.agreement_total)
    }

    /// Machine-readable key-value lines.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("acc.ambiguous_correct".into(), self.ambiguous_correct.to_string()),
            ("acc.ambiguous_total".into(), self.ambiguous_total.to_string()),
            ("acc.ambiguous".into(), format!("{:.4}", self.ambiguous_accuracy())),
            ("acc.overall_correct".into(), self.overall_correct.to_string()),
            ("acc.overall_total".into(), self.overall_total.to_string()),
            ("acc.overall".into(), format!("{:.4}", self.overall_accuracy())),
            ("acc.agreement_correct".into(), self.agreement_correct.to_string()),
            ("acc.agreement_total".into(), self.agreement_total.to_string()),
            ("acc.agreement".into(), format!("{:.4}", self.agreement())),
        ]
    }
}

fn rate(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64
}

/// Options that satisfy a minimal-context label under a model kind. Empty
/// means no single option suffices (both-sided needs on the context-unit
/// kind, which offers one side at a time).
pub fn satisfying_options(label: NeedLabel, variant: Variant) -> &'static [usize] {
    match variant {
        Variant::Concatenate => match label {
            NeedLabel::None => &[0],
            NeedLabel::Pre => &[1],
            NeedLabel::Pos => &[2],
            NeedLabel::Both => &[3],
        },
        Variant::ContextUnit => match label {
            NeedLabel::None => &[2],
            NeedLabel::Pre => &[0],
            NeedLabel::Pos => &[1],
            NeedLabel::Both => &[],
        },
    }
}

/// Token-exact accuracy of hypotheses against references, overall and on
/// the generator's disambiguation positions, plus agreement of the given
/// selections with the minimal sufficient context labels. `selections`
/// may be empty to score hypotheses alone.
pub fn synthetic_accuracy(
    hypotheses: &[Vec<Vec<usize>>],
    corpus: &DocumentCorpus,
    labels: &NeedLabels,
    selections: &[Vec<usize>],
    vocab: &Vocab,
    variant: Variant,
) -> Result<SynthAccuracy> {
    let lex = Lexicon::from_vocab(vocab)?;
    if hypotheses.len() != corpus.documents.len() {
        return Err(Error::LengthMismatch {
            what: "hypothesis documents vs corpus",
            left: hypotheses.len(),
            right: corpus.documents.len(),
        });
    }
    if labels.documents.len() != corpus.documents.len() {
        return Err(Error::LengthMismatch {
            what: "label documents vs corpus",
            left: labels.documents.len(),
            right: corpus.documents.len(),
        });
    }
    let mut acc = SynthAccuracy::default();
    for (d, doc) in corpus.documents.iter().enumerate() {
        if hypotheses[d].len() != doc.sentences.len()
            || labels.documents[d].len() != doc.sentences.len()
        {
            return Err(Error::LengthMismatch {
                what: "sentences vs corpus document",
                left: hypotheses[d].len().min(labels.documents[d].len()),
                right: doc.sentences.len(),
            });
        }
        for (s, pair) in doc.sentences.iter().enumerate() {
            let hyp = &hypotheses[d][s];
            for (t, &gold) in pair.tgt.iter().enumerate() {
                let hit = hyp.get(t) == Some(&gold);
                acc.overall_total += 1;
                acc.overall_correct += hit as usize;
                if pair.src.get(t).is_some_and(|&id| lex.is_disambiguation(id)) {
                    acc.ambiguous_total += 1;
                    acc.ambiguous_correct += hit as usize;
                }
            }
        }
    }
    if !selections.is_empty() {
        if selections.len() != labels.documents.len() {
            return Err(Error::LengthMismatch {
                what: "selection documents vs labels",
                left: selections.len(),
                right: labels.documents.len(),
            });
        }
        for (d, doc_sels) in selections.iter().enumerate() {
            if doc_sels.len() != labels.documents[d].len() {
                return Err(Error::LengthMismatch {
                    what: "selections vs labels",
                    left: doc_sels.len(),
                    right: labels.documents[d].len(),
                });
            }
            for (&sel, &label) in doc_sels.iter().zip(&labels.documents[d]) {
                acc.agreement_total += 1;
                acc.agreement_correct +=
                    satisfying_options(label, variant).contains(&sel) as usize;
            }
        }
    }
    Ok(acc)
}
