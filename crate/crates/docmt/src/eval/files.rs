//! Hypothesis files: one sentence per line, documents separated by one
//! blank line, mirroring the corpus layout. An empty hypothesis renders
//! as a blank line and reads back as a document break; downstream
//! scoring then fails loudly on a sentence-count mismatch instead of
//! silently misaligning.

use std::path::Path;

use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};

/// Writes decoded hypotheses as token text.
pub fn write_hypotheses(path: &Path, hyps: &[Vec<Vec<usize>>], vocab: &Vocab) -> Result<()> {
    let mut out = String::new();
    for (d, doc) in hyps.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for sent in doc {
            out.push_str(&vocab.decode_sentence(sent)?);
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Documents of whitespace-token sentences from hypothesis-layout text.
pub fn parse_token_docs(text: &str) -> Vec<Vec<Vec<String>>> {
    let mut docs: Vec<Vec<Vec<String>>> = Vec::new();
    let mut cur: Vec<Vec<String>> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                docs.push(std::mem::take(&mut cur));
            }
            continue;
        }
        cur.push(line.split_whitespace().map(str::to_string).collect());
    }
    if !cur.is_empty() {
        docs.push(cur);
    }
    docs
}

/// Reads a file for scoring. A file whose lines carry the ` ||| ` pair
/// separator is treated as a corpus file and contributes its target
/// side; anything else is hypothesis layout.
pub fn read_scorable_docs(path: &Path) -> Result<Vec<Vec<Vec<String>>>> {
    let text = std::fs::read_to_string(path)?;
    if !text.contains(" ||| ") {
        return Ok(parse_token_docs(&text));
    }
    let mut docs: Vec<Vec<Vec<String>>> = Vec::new();
    let mut cur: Vec<Vec<String>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                docs.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (_, tgt) = line.split_once(" ||| ").ok_or(Error::Parse {
            line: i + 1,
            msg: "expected `source ||| target`".into(),
        })?;
        cur.push(tgt.split_whitespace().map(str::to_string).collect());
    }
    if !cur.is_empty() {
        docs.push(cur);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{self, SynthConfig};
    use crate::corpus::{io, vocab::Vocab};

    fn small() -> (Vocab, crate::corpus::io::DocumentCorpus) {
        let scfg = SynthConfig { n_docs: 3, doc_len: 2, vocab_size: 24, ..SynthConfig::default() };
        let (vocab, corpus, _) = synth::generate(5, &scfg).unwrap();
        (vocab, corpus)
    }

    #[test]
    fn hypotheses_round_trip_through_the_reader() {
        let (vocab, corpus) = small();
        let hyps: Vec<Vec<Vec<usize>>> = corpus
            .documents
            .iter()
            .map(|d| d.sentences.iter().map(|p| p.tgt.clone()).collect())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hyp.txt");
        write_hypotheses(&path, &hyps, &vocab).unwrap();
        let back = read_scorable_docs(&path).unwrap();
        assert_eq!(back.len(), hyps.len());
        for (doc, hyp_doc) in back.iter().zip(&hyps) {
            assert_eq!(doc.len(), hyp_doc.len());
            for (sent, ids) in doc.iter().zip(hyp_doc) {
                let decoded: Vec<String> =
                    ids.iter().map(|&id| vocab.token(id).unwrap().to_string()).collect();
                assert_eq!(*sent, decoded);
            }
        }
    }

    #[test]
    fn corpus_files_contribute_their_target_side() {
        let (vocab, corpus) = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        io::write_corpus(&path, &corpus, &vocab).unwrap();
        let docs = read_scorable_docs(&path).unwrap();
        assert_eq!(docs.len(), corpus.documents.len());
        for (doc, cd) in docs.iter().zip(&corpus.documents) {
            for (sent, pair) in doc.iter().zip(&cd.sentences) {
                let decoded: Vec<String> =
                    pair.tgt.iter().map(|&id| vocab.token(id).unwrap().to_string()).collect();
                assert_eq!(*sent, decoded);
            }
        }
    }

    #[test]
    fn blank_line_handling_is_tolerant_of_extras() {
        let docs = parse_token_docs("a b\n\n\n\nc\n\n");
        assert_eq!(docs, vec![vec![vec!["a".to_string(), "b".to_string()]], vec![vec!["c".to_string()]]]);
    }
}
