//! `bleu`: corpus BLEU between a hypothesis file and a reference file.
//! Either side may be a corpus file (its target half scores) or a plain
//! hypothesis file.

use std::path::Path;

use docmt::config_file::Resolved;
use docmt::eval::{corpus_bleu, read_scorable_docs};

use crate::args::{echo_map, print_config, Cfg, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    CmdSpec {
        name: "bleu",
        about: "corpus BLEU-4 with brevity penalty over whitespace tokens",
        keys: vec![("io.hyp", ""), ("io.ref", ""), ("bleu.smooth", "false")],
        required: &["io.hyp", "io.ref"],
    }
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let smooth = c.bool("bleu.smooth")?;
    print_config("bleu", &echo_map(r));

    let hyp_docs = read_scorable_docs(Path::new(c.str("io.hyp")?))?;
    let ref_docs = read_scorable_docs(Path::new(c.str("io.ref")?))?;
    let hyps: Vec<Vec<String>> = hyp_docs.into_iter().flatten().collect();
    let refs: Vec<Vec<String>> = ref_docs.into_iter().flatten().collect();
    let score = corpus_bleu(&hyps, &refs, smooth)?;
    println!("bleu.pairs = {}", hyps.len());
    println!("bleu.score = {score:.4}");
    println!("BLEU = {score:.2}");
    Ok(())
}
