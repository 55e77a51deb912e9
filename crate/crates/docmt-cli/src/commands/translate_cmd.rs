//! `translate`: decode a corpus with a trained checkpoint and write the
//! hypotheses.

use std::path::Path;

use docmt::config_file::Resolved;
use docmt::corpus::io::{read_corpus, DocumentCorpus};
use docmt::corpus::vocab::Vocab;
use docmt::eval::translate::{translate_corpus, Policy, TranslateOutcome};
use docmt::eval::write_hypotheses;
use docmt::model::checkpoint::Checkpoint;
use docmt::model::config::ModelConfig;
use docmt::model::decoder::DecodeMode;
use docmt::model::params::Params;

use crate::args::{echo_map, print_config, Cfg, CliError, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    CmdSpec {
        name: "translate",
        about: "translate every document of a corpus with a trained checkpoint",
        keys: vec![
            ("io.ckpt", ""),
            ("io.vocab", ""),
            ("io.corpus", ""),
            ("io.out", ""),
            ("decode.policy", "adaptive"),
            ("decode.mode", "greedy"),
            ("decode.max_len", "32"),
        ],
        required: &["io.ckpt", "io.vocab", "io.corpus", "io.out"],
    }
}

pub fn parse_policy(s: &str) -> CliResult<Policy> {
    if s == "adaptive" {
        return Ok(Policy::Adaptive);
    }
    match s.strip_prefix("fixed:").and_then(|k| k.parse().ok()) {
        Some(k) => Ok(Policy::Fixed(k)),
        None => Err(CliError::Usage(format!(
            "decode.policy {s:?} is neither \"adaptive\" nor \"fixed:<option>\""
        ))),
    }
}

pub fn parse_mode(s: &str) -> CliResult<DecodeMode> {
    if s == "greedy" {
        return Ok(DecodeMode::Greedy);
    }
    match s.strip_prefix("beam:").and_then(|k| k.parse().ok()) {
        Some(k) if k > 0 => Ok(DecodeMode::Beam(k)),
        _ => Err(CliError::Usage(format!(
            "decode.mode {s:?} is neither \"greedy\" nor \"beam:<width>\""
        ))),
    }
}

/// Checkpoint plus the pieces every evaluation command needs.
pub struct LoadedModel {
    pub mcfg: ModelConfig,
    pub params: Params,
    pub no_doc_tips: bool,
}

pub fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let ck = Checkpoint::read(path)?;
    let mcfg = ck.model_config()?;
    let params = ck.to_params(&mcfg)?;
    let no_doc_tips = ck.meta.get("train.no_doc_tips").map(|v| v == "true").unwrap_or(false);
    Ok(LoadedModel { mcfg, params, no_doc_tips })
}

pub fn load_corpus(r: &Resolved) -> CliResult<(Vocab, DocumentCorpus)> {
    let c = Cfg(r);
    let vocab = Vocab::read(Path::new(c.str("io.vocab")?))?;
    let corpus = read_corpus(Path::new(c.str("io.corpus")?), &vocab)?;
    Ok((vocab, corpus))
}

pub fn run_one(
    model: &LoadedModel,
    corpus: &DocumentCorpus,
    policy: Policy,
    mode: DecodeMode,
    max_len: usize,
) -> CliResult<TranslateOutcome> {
    Ok(translate_corpus(
        &model.params,
        &model.mcfg,
        model.no_doc_tips,
        corpus,
        policy,
        mode,
        max_len,
    )?)
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let policy = parse_policy(c.str("decode.policy")?)?;
    let mode = parse_mode(c.str("decode.mode")?)?;
    let max_len = c.usize("decode.max_len")?;
    let model = load_model(Path::new(c.str("io.ckpt")?))?;
    let (vocab, corpus) = load_corpus(r)?;

    let mut echo = echo_map(r);
    echo.extend(model.mcfg.to_kv());
    echo.insert("train.no_doc_tips".into(), model.no_doc_tips.to_string());
    print_config("translate", &echo);

    let out = run_one(&model, &corpus, policy, mode, max_len)?;
    let out_path = c.str("io.out")?.to_string();
    write_hypotheses(Path::new(&out_path), &out.hypotheses, &vocab)?;
    for f in &out.failures {
        eprintln!("warning: document {} sentence {}: {}", f.doc, f.sent, f.message);
    }
    println!("translate.policy = {}", out.timing.mode);
    println!("translate.sentences = {}", out.timing.sentences);
    println!("translate.failures = {}", out.failures.len());
    println!("translate.sel_tokens = {}", out.timing.sel_tokens);
    println!("translate.enc_tokens = {}", out.timing.enc_tokens);
    println!("translate.dec_tokens = {}", out.timing.dec_tokens);
    println!("hypotheses = {out_path}");
    Ok(())
}
