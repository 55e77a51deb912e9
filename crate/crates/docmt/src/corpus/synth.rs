//! Synthetic context-dependent corpus.
//!
//! Every sentence carries exactly one marker token, `mk0` or `mk1`.
//! Ambiguous words resolve through a neighbor's marker: `ap{j}` translates
//! to `AP{j}M<bit>` where `<bit>` is the previous sentence's marker bit,
//! `aq{j}` to `AQ{j}M<bit>` with the next sentence's bit. Plain words
//! `w{j}` translate to `W{j}` unconditionally. Translation is word by
//! word, so target position i aligns with source position i.
//!
//! The per-sentence label records the minimal sufficient context. It is
//! written to a sidecar file for evaluation only and never shown to the
//! model. First sentences never contain `ap` words and last sentences
//! never contain `aq` words; drawn labels are downgraded to match.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::io::{Document, DocumentCorpus, NeedLabel, NeedLabels, SentencePair};
use crate::corpus::vocab::{Vocab, RESERVED, UNK};
use crate::error::{Error, Result};
use crate::rng;

/// Ambiguous tokens placed per needed context side. Two per side keeps the
/// translation cost of a wrong selection well above the diversity pull
/// toward uniform selection rates.
pub const AMB_PER_SIDE: usize = 2;

/// Reserved block, two marker pairs, one family of each kind.
pub const MIN_VOCAB: usize = RESERVED.len() + 4 + 3 + 3 + 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub doc_len: usize,
    pub vocab_size: usize,
    /// Fractions drawn for none, pre, pos, both, in `NeedLabel::ALL` order.
    pub fractions: [f64; 4],
    /// Sentence length bounds in tokens, marker included.
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 250,
            doc_len: 8,
            vocab_size: 64,
            fractions: [0.15, 0.25, 0.15, 0.45],
            min_len: 4,
            max_len: 6,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 || self.doc_len == 0 {
            return Err(Error::Config("n_docs and doc_len must be positive".into()));
        }
        if self.vocab_size < MIN_VOCAB {
            return Err(Error::Config(format!(
                "vocab_size {} below minimum {MIN_VOCAB}",
                self.vocab_size
            )));
        }
        if self.fractions.iter().any(|f| *f < 0.0 || !f.is_finite()) {
            return Err(Error::Config("fractions must be non-negative".into()));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("fractions sum to {sum}, expected 1")));
        }
        if self.min_len < 3 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "bad sentence length bounds {}..{}",
                self.min_len, self.max_len
            )));
        }
        // Longest requirement: marker plus both ambiguous sides.
        if self.fractions[3] > 0.0 && self.max_len < 1 + 2 * AMB_PER_SIDE {
            return Err(Error::Config(format!(
                "max_len {} cannot hold a both-context sentence",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// Token kinds of the generator grammar, recovered from token spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Marker(u8),
    /// Resolved by the previous sentence's marker; payload is the family.
    Prev(usize),
    /// Resolved by the next sentence's marker.
    Next(usize),
    Plain(usize),
    Other,
}

/// Grammar tables tying source ids to their target forms. Reconstructible
/// from any vocabulary that spells tokens the way the generator does, so
/// evaluation needs no side channel beyond the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    marker_src: [usize; 2],
    marker_tgt: [usize; 2],
    prev_src: Vec<usize>,
    prev_tgt: Vec<[usize; 2]>,
    next_src: Vec<usize>,
    next_tgt: Vec<[usize; 2]>,
    plain_src: Vec<usize>,
    plain_tgt: Vec<usize>,
}

fn lookup(vocab: &Vocab, token: &str) -> Option<usize> {
    let id = vocab.id(token);
    if id == UNK && token != RESERVED[UNK] {
        None
    } else {
        Some(id)
    }
}

impl Lexicon {
    /// Non-reserved token list for a vocabulary of exactly `vocab_size`.
    pub fn token_list(vocab_size: usize) -> Result<Vec<String>> {
        if vocab_size < MIN_VOCAB {
            return Err(Error::Config(format!(
                "vocab_size {vocab_size} below minimum {MIN_VOCAB}"
            )));
        }
        let mut words = vec!["mk0".to_string(), "mk1".into(), "MK0".into(), "MK1".into()];
        let mut budget = vocab_size - RESERVED.len() - words.len();
        // One family costs three tokens, a plain pair two. Two families per
        // side when the budget allows, then plain pairs fill the rest.
        let families = if budget >= 2 * (3 + 3) + 2 { 2 } else { 1 };
        for j in 0..families {
            words.push(format!("ap{j}"));
            words.push(format!("AP{j}M0"));
            words.push(format!("AP{j}M1"));
            words.push(format!("aq{j}"));
            words.push(format!("AQ{j}M0"));
            words.push(format!("AQ{j}M1"));
            budget -= 6;
        }
        let mut j = 0;
        while budget >= 2 {
            words.push(format!("w{j}"));
            words.push(format!("W{j}"));
            budget -= 2;
            j += 1;
        }
        Ok(words)
    }

    pub fn from_vocab(vocab: &Vocab) -> Result<Lexicon> {
        let need = |t: &str| {
            lookup(vocab, t).ok_or_else(|| Error::Config(format!("vocabulary lacks token {t:?}")))
        };
        let marker_src = [need("mk0")?, need("mk1")?];
        let marker_tgt = [need("MK0")?, need("MK1")?];
        let mut lex = Lexicon {
            marker_src,
            marker_tgt,
            prev_src: Vec::new(),
            prev_tgt: Vec::new(),
            next_src: Vec::new(),
            next_tgt: Vec::new(),
            plain_src: Vec::new(),
            plain_tgt: Vec::new(),
        };
        let mut j = 0;
        while let Some(id) = lookup(vocab, &format!("ap{j}")) {
            lex.prev_src.push(id);
            lex.prev_tgt.push([need(&format!("AP{j}M0"))?, need(&format!("AP{j}M1"))?]);
            j += 1;
        }
        let mut j = 0;
        while let Some(id) = lookup(vocab, &format!("aq{j}")) {
            lex.next_src.push(id);
            lex.next_tgt.push([need(&format!("AQ{j}M0"))?, need(&format!("AQ{j}M1"))?]);
            j += 1;
        }
        let mut j = 0;
        while let Some(id) = lookup(vocab, &format!("w{j}")) {
            lex.plain_src.push(id);
            lex.plain_tgt.push(need(&format!("W{j}"))?);
            j += 1;
        }
        if lex.prev_src.is_empty() || lex.next_src.is_empty() || lex.plain_src.is_empty() {
            return Err(Error::Config("vocabulary lacks generator token families".into()));
        }
        Ok(lex)
    }

    pub fn source_kind(&self, id: usize) -> SourceKind {
        if let Some(b) = self.marker_src.iter().position(|&m| m == id) {
            return SourceKind::Marker(b as u8);
        }
        if let Some(j) = self.prev_src.iter().position(|&m| m == id) {
            return SourceKind::Prev(j);
        }
        if let Some(j) = self.next_src.iter().position(|&m| m == id) {
            return SourceKind::Next(j);
        }
        if let Some(j) = self.plain_src.iter().position(|&m| m == id) {
            return SourceKind::Plain(j);
        }
        SourceKind::Other
    }

    pub fn is_disambiguation(&self, src_id: usize) -> bool {
        matches!(self.source_kind(src_id), SourceKind::Prev(_) | SourceKind::Next(_))
    }

    /// Marker bit of a sentence; `None` when malformed.
    pub fn marker_bit(&self, src: &[usize]) -> Option<u8> {
        let mut bit = None;
        for &id in src {
            if let SourceKind::Marker(b) = self.source_kind(id) {
                if bit.is_some() {
                    return None;
                }
                bit = Some(b);
            }
        }
        bit
    }

    /// Minimal sufficient context implied by a sentence's content.
    pub fn minimal_label(&self, src: &[usize]) -> NeedLabel {
        let mut pre = false;
        let mut pos = false;
        for &id in src {
            match self.source_kind(id) {
                SourceKind::Prev(_) => pre = true,
                SourceKind::Next(_) => pos = true,
                _ => {}
            }
        }
        match (pre, pos) {
            (false, false) => NeedLabel::None,
            (true, false) => NeedLabel::Pre,
            (false, true) => NeedLabel::Pos,
            (true, true) => NeedLabel::Both,
        }
    }

    /// Reference translation of sentence `idx` given its document's source
    /// sides. Fails when an ambiguous word lacks its resolving neighbor.
    pub fn oracle_target(&self, doc_srcs: &[Vec<usize>], idx: usize) -> Result<Vec<usize>> {
        let src = doc_srcs
            .get(idx)
            .ok_or_else(|| Error::Decode(format!("no sentence {idx} in document")))?;
        let neighbor_bit = |offset: isize, what: &str| -> Result<u8> {
            let n = idx as isize + offset;
            let sent = if n >= 0 { doc_srcs.get(n as usize) } else { None };
            sent.and_then(|s| self.marker_bit(s))
                .ok_or_else(|| Error::Decode(format!("sentence {idx} needs a {what} marker")))
        };
        let mut out = Vec::with_capacity(src.len());
        for &id in src {
            out.push(match self.source_kind(id) {
                SourceKind::Marker(b) => self.marker_tgt[b as usize],
                SourceKind::Plain(j) => self.plain_tgt[j],
                SourceKind::Prev(j) => self.prev_tgt[j][neighbor_bit(-1, "previous")? as usize],
                SourceKind::Next(j) => self.next_tgt[j][neighbor_bit(1, "next")? as usize],
                SourceKind::Other => {
                    return Err(Error::Decode(format!("token id {id} outside the grammar")))
                }
            });
        }
        Ok(out)
    }

    /// Context-free rule decoder: ambiguous words always guess sense 0, so
    /// it is exact on unambiguous positions and at chance elsewhere.
    pub fn context_free_target(&self, src: &[usize]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(src.len());
        for &id in src {
            out.push(match self.source_kind(id) {
                SourceKind::Marker(b) => self.marker_tgt[b as usize],
                SourceKind::Plain(j) => self.plain_tgt[j],
                SourceKind::Prev(j) => self.prev_tgt[j][0],
                SourceKind::Next(j) => self.next_tgt[j][0],
                SourceKind::Other => {
                    return Err(Error::Decode(format!("token id {id} outside the grammar")))
                }
            });
        }
        Ok(out)
    }
}

fn draw_label(rng: &mut impl Rng, fractions: &[f64; 4]) -> NeedLabel {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (label, f) in NeedLabel::ALL.iter().zip(fractions) {
        acc += f;
        if u < acc {
            return *label;
        }
    }
    NeedLabel::Both
}

fn amb_counts(label: NeedLabel) -> (usize, usize) {
    match label {
        NeedLabel::None => (0, 0),
        NeedLabel::Pre => (AMB_PER_SIDE, 0),
        NeedLabel::Pos => (0, AMB_PER_SIDE),
        NeedLabel::Both => (AMB_PER_SIDE, AMB_PER_SIDE),
    }
}

/// Generates the vocabulary, the corpus, and the hidden need labels.
pub fn generate(seed: u64, cfg: &SynthConfig) -> Result<(Vocab, DocumentCorpus, NeedLabels)> {
    cfg.validate()?;
    let vocab = Vocab::new(&Lexicon::token_list(cfg.vocab_size)?)?;
    let lex = Lexicon::from_vocab(&vocab)?;
    let mut rng = rng::stream(seed, "synth.corpus");

    let mut documents = Vec::with_capacity(cfg.n_docs);
    let mut all_labels = Vec::with_capacity(cfg.n_docs);
    for _ in 0..cfg.n_docs {
        let mut srcs: Vec<Vec<usize>> = Vec::with_capacity(cfg.doc_len);
        let mut labels = Vec::with_capacity(cfg.doc_len);
        for s in 0..cfg.doc_len {
            let mut label = draw_label(&mut rng, &cfg.fractions);
            if s == 0 {
                label = match label {
                    NeedLabel::Pre => NeedLabel::None,
                    NeedLabel::Both => NeedLabel::Pos,
                    other => other,
                };
            }
            if s == cfg.doc_len - 1 {
                label = match label {
                    NeedLabel::Pos => NeedLabel::None,
                    NeedLabel::Both => NeedLabel::Pre,
                    other => other,
                };
            }
            let (n_prev, n_next) = amb_counts(label);
            let drawn = rng.gen_range(cfg.min_len..=cfg.max_len);
            let len = drawn.max(1 + n_prev + n_next);
            let mut sent = Vec::with_capacity(len);
            sent.push(lex.marker_src[rng.gen_range(0..2usize)]);
            for _ in 0..n_prev {
                sent.push(lex.prev_src[rng.gen_range(0..lex.prev_src.len())]);
            }
            for _ in 0..n_next {
                sent.push(lex.next_src[rng.gen_range(0..lex.next_src.len())]);
            }
            while sent.len() < len {
                sent.push(lex.plain_src[rng.gen_range(0..lex.plain_src.len())]);
            }
            sent.shuffle(&mut rng);
            srcs.push(sent);
            labels.push(label);
        }
        let mut sentences = Vec::with_capacity(cfg.doc_len);
        for (i, src) in srcs.iter().enumerate() {
            let tgt = lex.oracle_target(&srcs, i)?;
            sentences.push(SentencePair { src: src.clone(), tgt });
        }
        documents.push(Document { sentences });
        all_labels.push(labels);
    }
    Ok((vocab, DocumentCorpus { documents }, NeedLabels { documents: all_labels }))
}
