//! Option-selection statistics over a corpus.

use crate::corpus::io::DocumentCorpus;
use crate::corpus::variants::{build_variants, strip_doc_tips};
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::decoder::encode_variant_on;
use crate::model::params::{Params, TapeParams};
use crate::predictor::{select_option, PredictorHead};
use crate::tensor::Tensor;

/// Per-option selection counts over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStats {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl SelectionStats {
    pub fn from_counts(labels: &[&str], counts: Vec<usize>) -> SelectionStats {
        assert_eq!(labels.len(), counts.len());
        let total = counts.iter().sum();
        SelectionStats { labels: labels.iter().map(|l| l.to_string()).collect(), counts, total }
    }

    pub fn percentages(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| 100.0 * c as f64 / self.total.max(1) as f64).collect()
    }

    /// Aligned-column report: one row per option plus a total line.
    pub fn render_table(&self) -> String {
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0).max("option".len());
        let mut out = format!("{:<width$}  {:>8}  {:>10}\n", "option", "num", "percentage");
        for ((label, &count), pct) in
            self.labels.iter().zip(&self.counts).zip(self.percentages())
        {
            out.push_str(&format!("{label:<width$}  {count:>8}  {pct:>9.2}%\n"));
        }
        out.push_str(&format!("{:<width$}  {:>8}\n", "total", self.total));
        out
    }

    /// Machine-readable key-value lines in option order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        for (i, ((label, &count), pct)) in
            self.labels.iter().zip(&self.counts).zip(self.percentages()).enumerate()
        {
            kv.push((format!("stats.option{i}.label"), label.clone()));
            kv.push((format!("stats.option{i}.count"), count.to_string()));
            kv.push((format!("stats.option{i}.percentage"), format!("{pct:.2}")));
        }
        kv.push(("stats.total".into(), self.total.to_string()));
        kv
    }
}

/// The predictor head stored in a parameter set.
pub fn predictor_head(params: &Params) -> Result<PredictorHead> {
    if !params.contains("predictor.w") || !params.contains("predictor.b") {
        return Err(Error::Checkpoint("checkpoint has no predictor head".into()));
    }
    PredictorHead::new(params.get("predictor.w").clone(), params.get("predictor.b").clone(), 1.0)
}

/// Position-mean of a hidden-state matrix, matching the training-time
/// pooling arithmetic.
pub fn pool_hidden(hv: &Tensor) -> Vec<f64> {
    let (rows, cols) = (hv.rows(), hv.cols());
    let mut pooled = vec![0.0; cols];
    for r in 0..rows {
        for (o, &x) in pooled.iter_mut().zip(hv.row(r)) {
            *o += x;
        }
    }
    for o in &mut pooled {
        *o /= rows as f64;
    }
    pooled
}

/// Pooled source-only encoding of one sentence: the empty-context variant
/// encoded and averaged over positions, exactly as the predictor sees it
/// in training.
pub fn pooled_empty(
    params: &Params,
    mcfg: &ModelConfig,
    no_doc_tips: bool,
    corpus: &DocumentCorpus,
    doc_idx: usize,
    sent_idx: usize,
) -> Result<Vec<f64>> {
    let mut v = build_variants(corpus, doc_idx, sent_idx, mcfg.variant)?
        .swap_remove(mcfg.variant.empty_option());
    if no_doc_tips {
        strip_doc_tips(&mut v);
    }
    let mut tp = TapeParams::new(params);
    let h = encode_variant_on(&mut tp, &v, mcfg)?;
    Ok(pool_hidden(tp.tape.value(h)))
}

/// Hard option choice for every sentence, in corpus order.
pub fn select_corpus(
    params: &Params,
    mcfg: &ModelConfig,
    no_doc_tips: bool,
    corpus: &DocumentCorpus,
) -> Result<Vec<Vec<usize>>> {
    let head = predictor_head(params)?;
    if head.n_options() != mcfg.variant.n_options() {
        return Err(Error::VariantMismatch(format!(
            "predictor has {} options, model kind {} expects {}",
            head.n_options(),
            mcfg.variant.as_str(),
            mcfg.variant.n_options()
        )));
    }
    let mut out = Vec::with_capacity(corpus.documents.len());
    for d in 0..corpus.documents.len() {
        let mut doc = Vec::with_capacity(corpus.documents[d].sentences.len());
        for s in 0..corpus.documents[d].sentences.len() {
            let pooled = pooled_empty(params, mcfg, no_doc_tips, corpus, d, s)?;
            doc.push(select_option(&pooled, &head)?);
        }
        out.push(doc);
    }
    Ok(out)
}

/// Counts of `select_option` over every sentence, in fixed option order.
pub fn selection_stats(
    params: &Params,
    mcfg: &ModelConfig,
    no_doc_tips: bool,
    corpus: &DocumentCorpus,
) -> Result<SelectionStats> {
    if corpus.n_sentences() == 0 {
        return Err(Error::EmptyInput("selection corpus".into()));
    }
    let selections = select_corpus(params, mcfg, no_doc_tips, corpus)?;
    let mut counts = vec![0usize; mcfg.variant.n_options()];
    for doc in &selections {
        for &k in doc {
            counts[k] += 1;
        }
    }
    Ok(SelectionStats::from_counts(mcfg.variant.option_names(), counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{self, SynthConfig};
    use crate::model::config::Variant;
    use crate::tensor::Tensor;

    #[test]
    fn published_count_row_renders_expected_percentages() {
        let stats = SelectionStats::from_counts(
            Variant::Concatenate.option_names(),
            vec![336, 578, 322, 1035],
        );
        assert_eq!(stats.total, 2271);
        let pct: Vec<String> =
            stats.percentages().iter().map(|p| format!("{p:.2}")).collect();
        assert_eq!(pct, ["14.80", "25.45", "14.18", "45.57"]);
        let rounded: f64 = pct.iter().map(|p| p.parse::<f64>().unwrap()).sum();
        assert!((rounded - 100.0).abs() <= 0.02);
        let table = stats.render_table();
        assert!(table.contains("pre|src|pos") && table.contains("45.57%"));
    }

    #[test]
    fn biased_bias_sends_every_sentence_to_one_option() {
        let scfg = SynthConfig { n_docs: 3, doc_len: 3, vocab_size: 24, ..SynthConfig::default() };
        let (_, corpus, _) = synth::generate(3, &scfg).unwrap();
        let mcfg = ModelConfig {
            variant: Variant::ContextUnit,
            vocab_size: 24,
            d_model: 16,
            n_heads: 2,
            d_ff: 16,
            enc_layers: 1,
            dec_layers: 1,
            max_len: 64,
            dropout: 0.0,
        };
        let mut params = Params::init(&mcfg, 0);
        let n = mcfg.variant.n_options();
        params.set("predictor.w", Tensor::zeros(&[mcfg.d_model, n]));
        let mut b = vec![0.0; n];
        b[0] = 50.0;
        params.set("predictor.b", Tensor::from_vec(&[n], b));

        let stats = selection_stats(&params, &mcfg, false, &corpus).unwrap();
        assert_eq!(stats.counts[0], corpus.n_sentences());
        assert_eq!(stats.counts.iter().sum::<usize>(), stats.total);
        assert_eq!(stats.total, corpus.n_sentences());
    }

    #[test]
    fn missing_predictor_is_rejected() {
        let stats = SelectionStats::from_counts(&["a"], vec![0]);
        assert_eq!(stats.total, 0);
        let params = Params::from_map(Default::default());
        assert!(predictor_head(&params).is_err());
    }
}
