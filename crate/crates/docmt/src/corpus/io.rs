//! Document corpus model and its on-disk format: one `source ||| target`
//! pair per line, a blank line between documents. A corpus may carry an
//! aligned sidecar of ground-truth context-need labels (synthetic data
//! only), one label per sentence in the same line layout.

use std::path::Path;

use crate::error::{Error, Result};
use crate::corpus::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub sentences: Vec<SentencePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocumentCorpus {
    pub documents: Vec<Document>,
}

impl DocumentCorpus {
    pub fn n_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn sentence(&self, doc_idx: usize, sent_idx: usize) -> Result<&SentencePair> {
        self.documents
            .get(doc_idx)
            .and_then(|d| d.sentences.get(sent_idx))
            .ok_or_else(|| {
                Error::Config(format!("no sentence at document {doc_idx}, index {sent_idx}"))
            })
    }

    /// (doc_idx, sent_idx) for every sentence, in corpus order.
    pub fn sentence_indices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_sentences());
        for (d, doc) in self.documents.iter().enumerate() {
            for s in 0..doc.sentences.len() {
                out.push((d, s));
            }
        }
        out
    }
}

/// Which neighboring sentences a synthetic sentence actually needs for
/// correct translation. Order mirrors the concatenate option table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeedLabel {
    None,
    Pre,
    Pos,
    Both,
}

impl NeedLabel {
    pub const ALL: [NeedLabel; 4] = [NeedLabel::None, NeedLabel::Pre, NeedLabel::Pos, NeedLabel::Both];

    pub fn as_str(&self) -> &'static str {
        match self {
            NeedLabel::None => "none",
            NeedLabel::Pre => "pre",
            NeedLabel::Pos => "pos",
            NeedLabel::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<NeedLabel> {
        match s {
            "none" => Ok(NeedLabel::None),
            "pre" => Ok(NeedLabel::Pre),
            "pos" => Ok(NeedLabel::Pos),
            "both" => Ok(NeedLabel::Both),
            other => Err(Error::Config(format!("unknown context label {other:?}"))),
        }
    }

    /// Position in the concatenate option order (non, pre, pos, both).
    pub fn option_index(&self) -> usize {
        match self {
            NeedLabel::None => 0,
            NeedLabel::Pre => 1,
            NeedLabel::Pos => 2,
            NeedLabel::Both => 3,
        }
    }
}

/// Per-document, per-sentence ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeedLabels {
    pub documents: Vec<Vec<NeedLabel>>,
}

pub fn write_corpus(path: &Path, corpus: &DocumentCorpus, vocab: &Vocab) -> Result<()> {
    let mut out = String::new();
    for (d, doc) in corpus.documents.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for pair in &doc.sentences {
            out.push_str(&vocab.decode_sentence(&pair.src)?);
            out.push_str(" ||| ");
            out.push_str(&vocab.decode_sentence(&pair.tgt)?);
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_corpus(path: &Path, vocab: &Vocab) -> Result<DocumentCorpus> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, vocab)
}

pub fn parse_corpus(text: &str, vocab: &Vocab) -> Result<DocumentCorpus> {
    let mut documents = Vec::new();
    let mut current = Document::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if current.sentences.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "blank line without a preceding document".into(),
                });
            }
            documents.push(std::mem::take(&mut current));
            continue;
        }
        let (src, tgt) = line.split_once("|||").ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected `source ||| target`".into(),
        })?;
        let src_ids = vocab.encode_sentence(src);
        let tgt_ids = vocab.encode_sentence(tgt);
        if src_ids.is_empty() || tgt_ids.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty source or target side".into(),
            });
        }
        current.sentences.push(SentencePair { src: src_ids, tgt: tgt_ids });
    }
    if !current.sentences.is_empty() {
        documents.push(current);
    }
    if documents.is_empty() {
        return Err(Error::EmptyInput("corpus has no documents".into()));
    }
    Ok(DocumentCorpus { documents })
}

pub fn write_labels(path: &Path, labels: &NeedLabels) -> Result<()> {
    let mut out = String::new();
    for (d, doc) in labels.documents.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for l in doc {
            out.push_str(l.as_str());
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<NeedLabels> {
    let text = std::fs::read_to_string(path)?;
    let mut documents = Vec::new();
    let mut current: Vec<NeedLabel> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if current.is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "stray blank line".into() });
            }
            documents.push(std::mem::take(&mut current));
            continue;
        }
        current.push(NeedLabel::parse(line.trim()).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    if !current.is_empty() {
        documents.push(current);
    }
    Ok(NeedLabels { documents })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_vocab() -> Vocab {
        Vocab::new(&["a", "b", "c", "d", "e"]).unwrap()
    }

    #[test]
    fn parse_blank_line_separates_documents() {
        let v = small_vocab();
        let c = parse_corpus("a b ||| c\nb ||| d\n\nc ||| e\n", &v).unwrap();
        assert_eq!(c.documents.len(), 2);
        assert_eq!(c.documents[0].sentences.len(), 2);
        assert_eq!(c.documents[1].sentences.len(), 1);
        assert_eq!(c.documents[0].sentences[0].src, vec![6, 7]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let v = small_vocab();
        let err = parse_corpus("a ||| b\nbroken line\n", &v).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_corpus("\na ||| b\n", &v).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_corpus(" ||| b\n", &v).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn corpus_round_trip_is_identity() {
        let v = small_vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        let c = parse_corpus("a b ||| c d\ne ||| a\n\nb ||| c\n", &v).unwrap();
        write_corpus(&path, &c, &v).unwrap();
        let back = read_corpus(&path, &v).unwrap();
        assert_eq!(back, c);
        // and byte-level idempotence of a second round trip
        let bytes1 = std::fs::read(&path).unwrap();
        write_corpus(&path, &back, &v).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        let labels = NeedLabels {
            documents: vec![
                vec![NeedLabel::None, NeedLabel::Both],
                vec![NeedLabel::Pre, NeedLabel::Pos],
            ],
        };
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path).unwrap(), labels);
    }
}
