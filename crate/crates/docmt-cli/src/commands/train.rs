//! `pretrain` and `finetune`: one training stage each over the same key
//! set; the subcommand fixes the stage.

use std::path::Path;

use docmt::config_file::{Resolved, Source};
use docmt::corpus::io::read_corpus;
use docmt::corpus::vocab::Vocab;
use docmt::losses::LossWeights;
use docmt::model::checkpoint::Checkpoint;
use docmt::trainer::{run_stage, LambdaMode, Stage, TrainConfig, TrainRecord};

use super::{model_from_keys, MODEL_KEYS, TRAIN_KEYS};
use crate::args::{echo_map, print_config, usage_err, Cfg, CliError, CliResult, CmdSpec};

pub fn spec(stage: Stage) -> CmdSpec {
    let mut keys =
        vec![("seed", "0"), ("io.corpus", ""), ("io.vocab", ""), ("io.ckpt", ""), ("io.init", "")];
    keys.extend_from_slice(MODEL_KEYS);
    keys.extend_from_slice(TRAIN_KEYS);
    let about = match stage {
        Stage::SentencePretrain => "sentence-level pretraining (all document terms off)",
        Stage::DocFinetune => "document-level finetuning of model and context predictor",
    };
    CmdSpec { name: stage.as_str(), about, keys, required: &["io.corpus", "io.vocab", "io.ckpt"] }
}

pub fn train_from_keys(r: &Resolved, stage: Stage) -> CliResult<TrainConfig> {
    let c = Cfg(r);
    let cfg = TrainConfig {
        stage,
        lr: c.f64("train.lr")?,
        adam_beta1: c.f64("train.adam_beta1")?,
        adam_beta2: c.f64("train.adam_beta2")?,
        adam_eps: c.f64("train.adam_eps")?,
        warmup: c.u64("train.warmup")?,
        clip: c.f64("train.clip")?,
        batch_size: c.usize("train.batch_size")?,
        max_steps: c.u64("train.max_steps")?,
        log_every: c.u64("train.log_every")?,
        ckpt_every: c.u64("train.ckpt_every")?,
        seed: c.u64("seed")?,
        weights: LossWeights {
            beta1: c.f64("train.beta1")?,
            beta2: c.f64("train.beta2")?,
            beta3: c.f64("train.beta3")?,
        },
        tau: c.f64("train.tau")?,
        mask_rate: c.f64("train.mask_rate")?,
        no_uni: c.bool("train.no_uni")?,
        no_div: c.bool("train.no_div")?,
        no_doc_tips: c.bool("train.no_doc_tips")?,
        lambda_mode: LambdaMode::parse(c.str("train.lambda")?).map_err(usage_err)?,
    };
    cfg.validate().map_err(usage_err)?;
    Ok(cfg)
}

/// One log line per record, fixed-width floats so reruns are
/// byte-identical.
pub fn print_record(rec: &TrainRecord) {
    let b = &rec.breakdown;
    println!(
        "step {:>6}  lr {:.6}  grad {:.6}  loss {:.6}  mt {:.6}  div {:.6}  uni {:.6}  mask {:.6}",
        rec.step, rec.lr, rec.grad_norm, b.total, b.l_mt, b.l_div, b.l_uni, b.l_mask
    );
}

pub fn run(stage: Stage, r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let tcfg = train_from_keys(r, stage)?;
    let vocab = Vocab::read(Path::new(c.str("io.vocab")?))?;
    let corpus = read_corpus(Path::new(c.str("io.corpus")?), &vocab)?;
    let init_path = c.str("io.init")?.to_string();
    let init = if init_path.is_empty() {
        None
    } else {
        Some(Checkpoint::read(Path::new(&init_path))?)
    };

    let mcfg = match &init {
        Some(ck) => {
            for (key, _) in MODEL_KEYS {
                if r.source(key) != Some(Source::Default) {
                    return Err(CliError::Usage(format!(
                        "--{key} conflicts with --io.init; the architecture comes from the checkpoint"
                    )));
                }
            }
            ck.model_config()?
        }
        None => model_from_keys(r, vocab.len())?,
    };
    if mcfg.vocab_size != vocab.len() {
        return Err(CliError::Runtime(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            mcfg.vocab_size
        )));
    }

    let mut echo = echo_map(r);
    echo.extend(mcfg.to_kv());
    echo.insert("train.stage".into(), stage.as_str().into());
    print_config(stage.as_str(), &echo);

    let ckpt_path = c.str("io.ckpt")?.to_string();
    let mut sink = |rec: &TrainRecord| print_record(rec);
    run_stage(&mcfg, &tcfg, &corpus, init.as_ref(), Some(Path::new(&ckpt_path)), &mut sink)?;
    println!("checkpoint = {ckpt_path}");
    Ok(())
}
