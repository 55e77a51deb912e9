//! Closed whitespace-token vocabulary with a fixed reserved block.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const SEP: usize = 3;
pub const MASK: usize = 4;
pub const UNK: usize = 5;

pub const RESERVED: [&str; 6] = ["<pad>", "<bos>", "<eos>", "<sep>", "<mask>", "<unk>"];

/// Bijective token-id map. Ids 0..6 are the reserved block, in
/// [`RESERVED`] order; file-loaded tokens follow in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Build from the non-reserved token list.
    pub fn new<S: AsRef<str>>(words: &[S]) -> Result<Vocab> {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for w in words {
            tokens.push(w.as_ref().to_string());
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id for a token; unknown tokens map to `<unk>`.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(Error::VocabId { id, vocab: self.tokens.len() })
    }

    pub fn encode_sentence(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    pub fn decode_sentence(&self, ids: &[usize]) -> Result<String> {
        let words: Result<Vec<&str>> = ids.iter().map(|&id| self.token(id)).collect();
        Ok(words?.join(" "))
    }

    /// One non-reserved token per line; reserved ids are implicit.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.tokens[RESERVED.len()..] {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path)?;
        let mut words = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "empty vocabulary line".into() });
            }
            words.push(t.to_string());
        }
        Vocab::new(&words)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocab::new(&["hund", "katze"]).unwrap();
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<sep>"), SEP);
        assert_eq!(v.id("<mask>"), MASK);
        assert_eq!(v.id("hund"), 6);
        assert_eq!(v.token(7).unwrap(), "katze");
    }

    #[test]
    fn unknown_maps_to_unk_and_bad_id_errors() {
        let v = Vocab::new(&["a"]).unwrap();
        assert_eq!(v.id("zzz"), UNK);
        assert!(matches!(v.token(99), Err(Error::VocabId { id: 99, .. })));
    }

    #[test]
    fn encode_decode_round_trip() {
        let v = Vocab::new(&["der", "hund", "lauft"]).unwrap();
        let ids = v.encode_sentence("der hund lauft");
        assert_eq!(ids, vec![6, 7, 8]);
        assert_eq!(v.decode_sentence(&ids).unwrap(), "der hund lauft");
    }

    #[test]
    fn duplicate_and_whitespace_tokens_rejected() {
        assert!(Vocab::new(&["a", "a"]).is_err());
        assert!(Vocab::new(&["a b"]).is_err());
        assert!(Vocab::new(&["<pad>"]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocab::new(&["alpha", "beta", "gamma"]).unwrap();
        v.write(&path).unwrap();
        assert_eq!(Vocab::read(&path).unwrap(), v);
    }
}
