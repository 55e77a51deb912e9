//! One module per subcommand plus the shared key tables.

pub mod ablate;
pub mod bleu_cmd;
pub mod gen_corpus;
pub mod gradcheck_cmd;
pub mod stats_cmd;
pub mod timing_cmd;
pub mod train;
pub mod translate_cmd;

use docmt::config_file::Resolved;
use docmt::model::config::{ModelConfig, Variant};
use docmt::trainer::Stage;

use crate::args::{usage_err, Cfg, CliResult, CmdSpec};

/// Architecture keys. `model.vocab_size` is deliberately absent: the
/// vocabulary file (or generated vocabulary) fixes it.
pub const MODEL_KEYS: &[(&str, &str)] = &[
    ("model.variant", "context-unit"),
    ("model.d_model", "32"),
    ("model.n_heads", "4"),
    ("model.d_ff", "64"),
    ("model.enc_layers", "2"),
    ("model.dec_layers", "2"),
    ("model.max_len", "64"),
    ("model.dropout", "0"),
];

pub const TRAIN_KEYS: &[(&str, &str)] = &[
    ("train.lr", "0.0003"),
    ("train.adam_beta1", "0.9"),
    ("train.adam_beta2", "0.98"),
    ("train.adam_eps", "1e-9"),
    ("train.warmup", "400"),
    ("train.clip", "1"),
    ("train.batch_size", "16"),
    ("train.max_steps", "200"),
    ("train.log_every", "10"),
    ("train.ckpt_every", "0"),
    ("train.beta1", "0.5"),
    ("train.beta2", "0.2"),
    ("train.beta3", "0.5"),
    ("train.tau", "1"),
    ("train.mask_rate", "0.15"),
    ("train.no_uni", "false"),
    ("train.no_div", "false"),
    ("train.no_doc_tips", "false"),
    ("train.lambda", "learned"),
];

pub const SYNTH_KEYS: &[(&str, &str)] = &[
    ("synth.n_docs", "250"),
    ("synth.doc_len", "8"),
    ("synth.vocab_size", "64"),
    ("synth.frac_none", "0.15"),
    ("synth.frac_pre", "0.25"),
    ("synth.frac_pos", "0.15"),
    ("synth.frac_both", "0.45"),
    ("synth.min_len", "4"),
    ("synth.max_len", "6"),
];

/// Builds a model config from `model.*` keys; the vocabulary size comes
/// from the loaded vocabulary, never from a flag.
pub fn model_from_keys(r: &Resolved, vocab_size: usize) -> CliResult<ModelConfig> {
    let c = Cfg(r);
    let cfg = ModelConfig {
        variant: Variant::parse(c.str("model.variant")?).map_err(usage_err)?,
        vocab_size,
        d_model: c.usize("model.d_model")?,
        n_heads: c.usize("model.n_heads")?,
        d_ff: c.usize("model.d_ff")?,
        enc_layers: c.usize("model.enc_layers")?,
        dec_layers: c.usize("model.dec_layers")?,
        max_len: c.usize("model.max_len")?,
        dropout: c.f64("model.dropout")?,
    };
    cfg.validate().map_err(usage_err)?;
    Ok(cfg)
}

pub fn spec_for(name: &str) -> Option<CmdSpec> {
    match name {
        "gen-corpus" => Some(gen_corpus::spec()),
        "pretrain" => Some(train::spec(Stage::SentencePretrain)),
        "finetune" => Some(train::spec(Stage::DocFinetune)),
        "translate" => Some(translate_cmd::spec()),
        "bleu" => Some(bleu_cmd::spec()),
        "stats" => Some(stats_cmd::spec()),
        "timing" => Some(timing_cmd::spec()),
        "gradcheck" => Some(gradcheck_cmd::spec()),
        "ablate" => Some(ablate::spec()),
        _ => None,
    }
}

pub fn run(name: &str, r: &Resolved) -> CliResult<()> {
    match name {
        "gen-corpus" => gen_corpus::run(r),
        "pretrain" => train::run(Stage::SentencePretrain, r),
        "finetune" => train::run(Stage::DocFinetune, r),
        "translate" => translate_cmd::run(r),
        "bleu" => bleu_cmd::run(r),
        "stats" => stats_cmd::run(r),
        "timing" => timing_cmd::run(r),
        "gradcheck" => gradcheck_cmd::run(r),
        "ablate" => ablate::run(r),
        _ => unreachable!("dispatch checked by spec_for"),
    }
}
