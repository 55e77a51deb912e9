//! `gen-corpus`: write a synthetic document corpus, its vocabulary and
//! the per-sentence minimal-context labels.

use std::path::Path;

use docmt::config_file::Resolved;
use docmt::corpus::io::{write_corpus, write_labels, NeedLabel};
use docmt::corpus::synth::{self, SynthConfig};

use super::SYNTH_KEYS;
use crate::args::{echo_map, print_config, usage_err, Cfg, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    let mut keys = vec![("seed", "0"), ("io.corpus", ""), ("io.vocab", ""), ("io.labels", "")];
    keys.extend_from_slice(SYNTH_KEYS);
    CmdSpec {
        name: "gen-corpus",
        about: "generate a synthetic document corpus with context-need labels",
        keys,
        required: &["io.corpus", "io.vocab", "io.labels"],
    }
}

pub fn synth_from_keys(r: &Resolved) -> CliResult<SynthConfig> {
    let c = Cfg(r);
    let cfg = SynthConfig {
        n_docs: c.usize("synth.n_docs")?,
        doc_len: c.usize("synth.doc_len")?,
        vocab_size: c.usize("synth.vocab_size")?,
        fractions: [
            c.f64("synth.frac_none")?,
            c.f64("synth.frac_pre")?,
            c.f64("synth.frac_pos")?,
            c.f64("synth.frac_both")?,
        ],
        min_len: c.usize("synth.min_len")?,
        max_len: c.usize("synth.max_len")?,
    };
    cfg.validate().map_err(usage_err)?;
    Ok(cfg)
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let scfg = synth_from_keys(r)?;
    let seed = c.u64("seed")?;
    print_config("gen-corpus", &echo_map(r));

    let (vocab, corpus, labels) = synth::generate(seed, &scfg)?;
    vocab.write(Path::new(c.str("io.vocab")?))?;
    write_corpus(Path::new(c.str("io.corpus")?), &corpus, &vocab)?;
    write_labels(Path::new(c.str("io.labels")?), &labels)?;

    let mut counts = [0usize; 4];
    for doc in &labels.documents {
        for label in doc {
            counts[label.option_index()] += 1;
        }
    }
    println!("corpus.documents = {}", corpus.documents.len());
    println!("corpus.sentences = {}", corpus.n_sentences());
    println!("corpus.vocab = {}", vocab.len());
    for label in NeedLabel::ALL {
        println!("corpus.labels.{} = {}", label.as_str(), counts[label.option_index()]);
    }
    Ok(())
}
