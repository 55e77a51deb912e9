//! Sequential document translation with per-sentence option selection,
//! plus the decode-timing report.

use std::time::Instant;

use crate::corpus::io::DocumentCorpus;
use crate::corpus::variants::{build_variants, rebind_pre_target, strip_doc_tips};
use crate::error::{Error, Result};
use crate::eval::stats::{pool_hidden, predictor_head};
use crate::model::config::{ModelConfig, Variant};
use crate::model::decoder::{decode, encode_variant_on, DecodeMode};
use crate::model::params::{Params, TapeParams};
use crate::predictor::select_option;

/// How the context option is chosen per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Predictor argmax over the source-only encoding.
    Adaptive,
    /// The same option for every sentence.
    Fixed(usize),
}

impl Policy {
    pub fn label(&self, variant: Variant) -> String {
        match self {
            Policy::Adaptive => "adaptive".into(),
            Policy::Fixed(k) => format!("fixed:{}", variant.option_names()[*k]),
        }
    }
}

/// Work and wall time of one translation run. Selector, encoder, and
/// decoder tokens are listed separately so each stage's share of the
/// context cost stays visible; a single total would hide it. Counts are
/// real encoder input sizes, so the context-unit variant counts both of
/// its streams.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub mode: String,
    pub sentences: usize,
    pub sel_tokens: usize,
    pub enc_tokens: usize,
    pub dec_tokens: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    /// Aligned-column report, one row per mode.
    pub fn render_table(&self) -> String {
        let width =
            self.rows.iter().map(|r| r.mode.len()).max().unwrap_or(0).max("mode".len());
        let mut out = format!(
            "{:<width$}  {:>9}  {:>10}  {:>10}  {:>10}  {:>10}  {:>9}\n",
            "mode", "sentences", "sel tokens", "enc tokens", "dec tokens", "all tokens", "seconds"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>9}  {:>10}  {:>10}  {:>10}  {:>10}  {:>9.3}\n",
                r.mode,
                r.sentences,
                r.sel_tokens,
                r.enc_tokens,
                r.dec_tokens,
                r.sel_tokens + r.enc_tokens + r.dec_tokens,
                r.seconds
            ));
        }
        out
    }

    /// Machine-readable key-value lines in row order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            kv.push((format!("timing.row{i}.mode"), r.mode.clone()));
            kv.push((format!("timing.row{i}.sentences"), r.sentences.to_string()));
            kv.push((format!("timing.row{i}.sel_tokens"), r.sel_tokens.to_string()));
            kv.push((format!("timing.row{i}.enc_tokens"), r.enc_tokens.to_string()));
            kv.push((format!("timing.row{i}.dec_tokens"), r.dec_tokens.to_string()));
            kv.push((format!("timing.row{i}.seconds"), format!("{:.6}", r.seconds)));
        }
        kv
    }
}

#[derive(Debug, Clone)]
pub struct SentenceFailure {
    pub doc: usize,
    pub sent: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct TranslateOutcome {
    /// Current-sentence hypothesis tokens, `[doc][sentence]`, no `<eos>`.
    pub hypotheses: Vec<Vec<Vec<usize>>>,
    /// Chosen option per sentence, `[doc][sentence]`.
    pub selections: Vec<Vec<usize>>,
    /// Sentences whose decode failed; their hypothesis stays empty.
    pub failures: Vec<SentenceFailure>,
    pub timing: TimingRow,
}

/// Translates every document in order, sentence by sentence. Sentences are
/// decoded strictly sequentially because options with pre-context force the
/// previously produced hypothesis as decoder prefix. Timing wraps only this
/// loop. Decode failures are collected and translation continues.
pub fn translate_corpus(
    params: &Params,
    mcfg: &ModelConfig,
    no_doc_tips: bool,
    corpus: &DocumentCorpus,
    policy: Policy,
    mode: DecodeMode,
    max_len: usize,
) -> Result<TranslateOutcome> {
    let n = mcfg.variant.n_options();
    if let Policy::Fixed(k) = policy {
        if k >= n {
            return Err(Error::InvalidOption { option: k, n_options: n });
        }
    }
    let head = match policy {
        Policy::Adaptive => Some(predictor_head(params)?),
        Policy::Fixed(_) => None,
    };
    if let Some(h) = &head {
        if h.n_options() != n {
            return Err(Error::VariantMismatch(format!(
                "predictor has {} options, model kind {} expects {}",
                h.n_options(),
                mcfg.variant.as_str(),
                n
            )));
        }
    }

    let mut hypotheses: Vec<Vec<Vec<usize>>> = Vec::with_capacity(corpus.documents.len());
    let mut selections: Vec<Vec<usize>> = Vec::with_capacity(corpus.documents.len());
    let mut failures = Vec::new();
    let mut timing = TimingRow {
        mode: policy.label(mcfg.variant),
        sentences: 0,
        sel_tokens: 0,
        enc_tokens: 0,
        dec_tokens: 0,
        seconds: 0.0,
    };

    let started = Instant::now();
    for d in 0..corpus.documents.len() {
        let n_sents = corpus.documents[d].sentences.len();
        let mut doc_hyps: Vec<Vec<usize>> = Vec::with_capacity(n_sents);
        let mut doc_sels: Vec<usize> = Vec::with_capacity(n_sents);
        for s in 0..n_sents {
            timing.sentences += 1;
            let mut variants = build_variants(corpus, d, s, mcfg.variant)?;
            if no_doc_tips {
                for v in variants.iter_mut() {
                    strip_doc_tips(v);
                }
            }
            let k = match (&policy, &head) {
                (Policy::Fixed(k), _) => *k,
                (Policy::Adaptive, Some(h)) => {
                    let empty = &variants[mcfg.variant.empty_option()];
                    timing.sel_tokens += empty.encoder_tokens(mcfg.variant);
                    let mut tp = TapeParams::new(params);
                    let hid = encode_variant_on(&mut tp, empty, mcfg)?;
                    select_option(&pool_hidden(tp.tape.value(hid)), h)?
                }
                (Policy::Adaptive, None) => unreachable!(),
            };
            doc_sels.push(k);

            let mut v = variants.swap_remove(k);
            let prev_hyp = s.checked_sub(1).map(|p| doc_hyps[p].as_slice()).unwrap_or(&[]);
            rebind_pre_target(&mut v, prev_hyp);
            timing.enc_tokens += v.encoder_tokens(mcfg.variant);
            match decode(params, mcfg, &v, mode, max_len) {
                Ok(tokens) => {
                    timing.dec_tokens += tokens.len();
                    doc_hyps.push(tokens[v.forced_tgt_prefix.len()..].to_vec());
                }
                Err(e) => {
                    failures.push(SentenceFailure { doc: d, sent: s, message: e.to_string() });
                    doc_hyps.push(Vec::new());
                }
            }
        }
        hypotheses.push(doc_hyps);
        selections.push(doc_sels);
    }
    timing.seconds = started.elapsed().as_secs_f64();
    Ok(TranslateOutcome { hypotheses, selections, failures, timing })
}
