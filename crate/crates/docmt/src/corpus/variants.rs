//! Context-variant construction: for one sentence, the N concrete model
//! inputs the predictor chooses between.

use crate::corpus::io::DocumentCorpus;
use crate::corpus::vocab::{EOS, SEP};
use crate::error::{Error, Result};
use crate::model::config::Variant;
use crate::model::encoder::{SEG_CUR, SEG_POS, SEG_PRE, SEG_SEP};

/// One concrete model input for one context option.
///
/// `tgt_ids` is the label sequence the decoder is trained to emit
/// (context prefix, separator, current sentence, `<eos>`); `tgt_loss_mask`
/// is true exactly on the current-sentence span of it. For the
/// context-unit variant the context sentence travels in `ctx_ids` and the
/// concatenation fields stay flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextVariant {
    pub option: usize,
    pub src_ids: Vec<usize>,
    pub src_segments: Vec<usize>,
    /// Context-unit stream input; empty means "no context" (the forward
    /// substitutes the source itself).
    pub ctx_ids: Vec<usize>,
    pub tgt_ids: Vec<usize>,
    pub tgt_segments: Vec<usize>,
    pub tgt_loss_mask: Vec<bool>,
    /// Decoder tokens forced verbatim at inference (pre-context target
    /// plus separator); gold context when built from a corpus.
    pub forced_tgt_prefix: Vec<usize>,
    /// How many decoder layers this option skips.
    pub dec_depth_delta: usize,
}

impl ContextVariant {
    /// Positions of the current sentence inside `src_ids`.
    pub fn current_src_span(&self) -> (usize, usize) {
        let start = self.src_segments.iter().position(|&s| s == SEG_CUR).unwrap_or(0);
        let len = self.src_segments[start..]
            .iter()
            .take_while(|&&s| s == SEG_CUR)
            .count();
        (start, len)
    }

    /// Tokens the encoder actually processes for this variant. The
    /// context-unit encoder always runs its second stream, feeding it the
    /// source itself when `ctx_ids` is empty, so both streams count.
    pub fn encoder_tokens(&self, variant: Variant) -> usize {
        match variant {
            Variant::Concatenate => self.src_ids.len(),
            Variant::ContextUnit => {
                let ctx = if self.ctx_ids.is_empty() {
                    self.src_ids.len()
                } else {
                    self.ctx_ids.len()
                };
                self.src_ids.len() + ctx
            }
        }
    }
}

/// Builds the full option set for sentence `sent_idx` of document
/// `doc_idx`, in fixed option order.
pub fn build_variants(
    corpus: &DocumentCorpus,
    doc_idx: usize,
    sent_idx: usize,
    variant: Variant,
) -> Result<Vec<ContextVariant>> {
    let doc = corpus
        .documents
        .get(doc_idx)
        .ok_or_else(|| Error::Config(format!("no document {doc_idx}")))?;
    let cur = doc
        .sentences
        .get(sent_idx)
        .ok_or_else(|| Error::Config(format!("no sentence {sent_idx} in document {doc_idx}")))?;
    let prev = sent_idx.checked_sub(1).and_then(|i| doc.sentences.get(i));
    let next = doc.sentences.get(sent_idx + 1);

    let out = match variant {
        Variant::ContextUnit => {
            let plain_tgt = TargetSide::plain(&cur.tgt);
            (0..3)
                .map(|option| {
                    let ctx_ids = match option {
                        0 => prev.map(|p| p.src.clone()).unwrap_or_default(),
                        1 => next.map(|n| n.src.clone()).unwrap_or_default(),
                        _ => Vec::new(),
                    };
                    ContextVariant {
                        option,
                        src_ids: cur.src.clone(),
                        src_segments: vec![SEG_CUR; cur.src.len()],
                        ctx_ids,
                        tgt_ids: plain_tgt.ids.clone(),
                        tgt_segments: plain_tgt.segments.clone(),
                        tgt_loss_mask: plain_tgt.loss_mask.clone(),
                        forced_tgt_prefix: Vec::new(),
                        dec_depth_delta: 0,
                    }
                })
                .collect()
        }
        Variant::Concatenate => {
            let reductions = [2usize, 1, 1, 0];
            (0..4)
                .map(|option| {
                    let with_pre = option == 1 || option == 3;
                    let with_pos = option == 2 || option == 3;
                    let pre = if with_pre { prev } else { None };
                    let pos = if with_pos { next } else { None };
                    let (src_ids, src_segments) = concat_source(
                        pre.map(|p| p.src.as_slice()),
                        &cur.src,
                        pos.map(|n| n.src.as_slice()),
                    );
                    let tgt = TargetSide::with_pre(pre.map(|p| p.tgt.as_slice()), &cur.tgt);
                    ContextVariant {
                        option,
                        src_ids,
                        src_segments,
                        ctx_ids: Vec::new(),
                        tgt_ids: tgt.ids,
                        tgt_segments: tgt.segments,
                        tgt_loss_mask: tgt.loss_mask,
                        forced_tgt_prefix: tgt.forced_prefix,
                        dec_depth_delta: reductions[option],
                    }
                })
                .collect()
        }
    };
    Ok(out)
}

fn concat_source(
    pre: Option<&[usize]>,
    cur: &[usize],
    pos: Option<&[usize]>,
) -> (Vec<usize>, Vec<usize>) {
    let mut ids = Vec::new();
    let mut segs = Vec::new();
    if let Some(p) = pre {
        ids.extend_from_slice(p);
        segs.extend(std::iter::repeat(SEG_PRE).take(p.len()));
        ids.push(SEP);
        segs.push(SEG_SEP);
    }
    ids.extend_from_slice(cur);
    segs.extend(std::iter::repeat(SEG_CUR).take(cur.len()));
    if let Some(n) = pos {
        ids.push(SEP);
        segs.push(SEG_SEP);
        ids.extend_from_slice(n);
        segs.extend(std::iter::repeat(SEG_POS).take(n.len()));
    }
    (ids, segs)
}

struct TargetSide {
    ids: Vec<usize>,
    segments: Vec<usize>,
    loss_mask: Vec<bool>,
    forced_prefix: Vec<usize>,
}

impl TargetSide {
    fn plain(cur: &[usize]) -> TargetSide {
        let mut ids = cur.to_vec();
        ids.push(EOS);
        let n = ids.len();
        TargetSide {
            ids,
            segments: vec![SEG_CUR; n],
            loss_mask: vec![true; n],
            forced_prefix: Vec::new(),
        }
    }

    /// Pre-context target precedes the current sentence; post context never
    /// appears on the decoder side (unavailable when generating).
    fn with_pre(pre: Option<&[usize]>, cur: &[usize]) -> TargetSide {
        let mut t = TargetSide {
            ids: Vec::new(),
            segments: Vec::new(),
            loss_mask: Vec::new(),
            forced_prefix: Vec::new(),
        };
        if let Some(p) = pre {
            t.ids.extend_from_slice(p);
            t.segments.extend(std::iter::repeat(SEG_PRE).take(p.len()));
            t.loss_mask.extend(std::iter::repeat(false).take(p.len()));
            t.ids.push(SEP);
            t.segments.push(SEG_SEP);
            t.loss_mask.push(false);
            t.forced_prefix = t.ids.clone();
        }
        t.ids.extend_from_slice(cur);
        t.ids.push(EOS);
        let cur_len = cur.len() + 1;
        t.segments.extend(std::iter::repeat(SEG_CUR).take(cur_len));
        t.loss_mask.extend(std::iter::repeat(true).take(cur_len));
        t
    }
}

/// Swaps the gold pre-context target for the running translation. At
/// inference the previous reference is unavailable, so options that force
/// a target prefix force the previously produced hypothesis instead. Does
/// nothing on variants without a pre-target prefix.
pub fn rebind_pre_target(v: &mut ContextVariant, prev_hyp: &[usize]) {
    let old = v.forced_tgt_prefix.len();
    if old == 0 {
        return;
    }
    let mut ids: Vec<usize> = prev_hyp.to_vec();
    ids.push(SEP);
    let mut segments = vec![SEG_PRE; prev_hyp.len()];
    segments.push(SEG_SEP);
    let mut loss_mask = vec![false; ids.len()];
    v.forced_tgt_prefix = ids.clone();
    ids.extend_from_slice(&v.tgt_ids[old..]);
    segments.extend_from_slice(&v.tgt_segments[old..]);
    loss_mask.extend_from_slice(&v.tgt_loss_mask[old..]);
    v.tgt_ids = ids;
    v.tgt_segments = segments;
    v.tgt_loss_mask = loss_mask;
}

/// Removes the document tips from a variant: segment distinctions collapse
/// to the current-sentence id and the decoder runs at full depth. Token
/// content, separators and loss masks stay as built.
pub fn strip_doc_tips(v: &mut ContextVariant) {
    for s in v.src_segments.iter_mut() {
        *s = SEG_CUR;
    }
    for s in v.tgt_segments.iter_mut() {
        *s = SEG_CUR;
    }
    v.dec_depth_delta = 0;
}
