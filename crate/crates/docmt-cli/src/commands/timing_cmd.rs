//! `timing`: sequential batch-size-one decode timing across context
//! policies, one row per fixed option plus the adaptive policy. Seconds
//! are wall clock and vary between runs; all token counts are exact.

use std::path::Path;

use docmt::config_file::Resolved;
use docmt::eval::translate::{Policy, TimingReport};

use super::translate_cmd::{load_corpus, load_model, parse_mode, run_one};
use crate::args::{echo_map, print_config, Cfg, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    CmdSpec {
        name: "timing",
        about: "decode-timing report across fixed context policies and adaptive selection",
        keys: vec![
            ("io.ckpt", ""),
            ("io.vocab", ""),
            ("io.corpus", ""),
            ("decode.mode", "greedy"),
            ("decode.max_len", "32"),
        ],
        required: &["io.ckpt", "io.vocab", "io.corpus"],
    }
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let mode = parse_mode(c.str("decode.mode")?)?;
    let max_len = c.usize("decode.max_len")?;
    let model = load_model(Path::new(c.str("io.ckpt")?))?;
    let (_, corpus) = load_corpus(r)?;

    let mut echo = echo_map(r);
    echo.extend(model.mcfg.to_kv());
    echo.insert("train.no_doc_tips".into(), model.no_doc_tips.to_string());
    print_config("timing", &echo);

    let mut report = TimingReport { rows: Vec::new() };
    for k in 0..model.mcfg.variant.n_options() {
        report.rows.push(run_one(&model, &corpus, Policy::Fixed(k), mode, max_len)?.timing);
    }
    report.rows.push(run_one(&model, &corpus, Policy::Adaptive, mode, max_len)?.timing);

    print!("{}", report.render_table());
    println!();
    for (k, v) in report.to_kv() {
        println!("{k} = {v}");
    }
    Ok(())
}
