//! `stats`: option-selection counts and percentages of a trained
//! predictor over a corpus.

use std::path::Path;

use docmt::config_file::Resolved;
use docmt::eval::stats::selection_stats;

use super::translate_cmd::{load_corpus, load_model};
use crate::args::{echo_map, print_config, Cfg, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    CmdSpec {
        name: "stats",
        about: "per-option selection statistics of the context predictor",
        keys: vec![("io.ckpt", ""), ("io.vocab", ""), ("io.corpus", "")],
        required: &["io.ckpt", "io.vocab", "io.corpus"],
    }
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let model = load_model(Path::new(c.str("io.ckpt")?))?;
    let (_, corpus) = load_corpus(r)?;

    let mut echo = echo_map(r);
    echo.extend(model.mcfg.to_kv());
    echo.insert("train.no_doc_tips".into(), model.no_doc_tips.to_string());
    print_config("stats", &echo);

    let stats = selection_stats(&model.params, &model.mcfg, model.no_doc_tips, &corpus)?;
    print!("{}", stats.render_table());
    println!();
    for (k, v) in stats.to_kv() {
        println!("{k} = {v}");
    }
    Ok(())
}
