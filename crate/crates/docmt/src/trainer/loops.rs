//! Stage drivers: step-derived batching, the optimizer loop, and the
//! checkpoint lifecycle.
//!
//! Batch composition is a pure function of the seed and the step index, so
//! a resumed run replays exactly the batches a straight run would see.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::corpus::io::DocumentCorpus;
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::model::checkpoint::Checkpoint;
use crate::model::config::ModelConfig;
use crate::model::params::Params;
use crate::rng;
use crate::trainer::adam::Adam;
use crate::trainer::step::batch_step;
use crate::trainer::{Stage, TrainConfig};

/// One logged optimizer step. `step` counts completed steps, so a fresh
/// run's first record carries step 1.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub step: u64,
    pub lr: f64,
    pub grad_norm: f64,
    pub breakdown: LossBreakdown,
}

pub fn steps_per_epoch(n_sentences: usize, batch_size: usize) -> u64 {
    assert!(n_sentences > 0 && batch_size > 0);
    n_sentences.div_ceil(batch_size) as u64
}

/// Sentence order for one epoch, derived only from the seed and epoch.
pub fn epoch_order(corpus: &DocumentCorpus, seed: u64, epoch: u64) -> Vec<(usize, usize)> {
    let mut order = corpus.sentence_indices();
    let mut rng = rng::stream(seed, &format!("shuffle.e{epoch}"));
    order.shuffle(&mut rng);
    order
}

/// The batch consumed by the zero-based step index.
pub fn batch_for_step(
    corpus: &DocumentCorpus,
    seed: u64,
    batch_size: usize,
    step: u64,
) -> Vec<(usize, usize)> {
    let n = corpus.n_sentences();
    let spe = steps_per_epoch(n, batch_size);
    let order = epoch_order(corpus, seed, step / spe);
    let at = (step % spe) as usize * batch_size;
    order[at..(at + batch_size).min(n)].to_vec()
}

/// Full state snapshot: model config, parameters, training progress and
/// optimizer moments.
pub fn build_checkpoint(
    params: &Params,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    adam: Option<&Adam>,
    step: u64,
) -> Checkpoint {
    let mut ck = Checkpoint::default();
    ck.set_model_config(mcfg);
    ck.meta.insert("train.stage".into(), tcfg.stage.as_str().into());
    ck.meta.insert("train.step".into(), step.to_string());
    // Decoding must strip document tips exactly as training did.
    ck.meta.insert("train.no_doc_tips".into(), tcfg.no_doc_tips.to_string());
    ck.insert_params(params);
    if let Some(a) = adam {
        a.save_into(&mut ck);
    }
    ck
}

/// Runs optimizer steps until `max_steps`, starting from the optimizer's
/// current count. Writes a snapshot to `ckpt_path` every `ckpt_every`
/// steps when both are set.
pub fn run_training(
    params: &mut Params,
    adam: &mut Adam,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    ckpt_path: Option<&Path>,
    sink: &mut dyn FnMut(&TrainRecord),
) -> Result<()> {
    if corpus.n_sentences() == 0 {
        return Err(Error::EmptyInput("training corpus".into()));
    }
    while adam.step_count() < tcfg.max_steps {
        let step = adam.step_count();
        let batch = batch_for_step(corpus, tcfg.seed, tcfg.batch_size, step);
        let out = batch_step(params, mcfg, tcfg, corpus, &batch, step, true)?;
        if !out.breakdown.total.is_finite() {
            return Err(Error::Divergence { step: step + 1 });
        }
        let grad_norm = adam.apply(params, &out.grads)?;
        let done = adam.step_count();
        if tcfg.log_every > 0 && (done % tcfg.log_every == 0 || done == tcfg.max_steps) {
            sink(&TrainRecord {
                step: done,
                lr: adam.lr_at(done),
                grad_norm,
                breakdown: out.breakdown,
            });
        }
        if let Some(path) = ckpt_path {
            if tcfg.ckpt_every > 0 && done % tcfg.ckpt_every == 0 && done < tcfg.max_steps {
                build_checkpoint(params, mcfg, tcfg, Some(adam), done).write(path)?;
            }
        }
    }
    Ok(())
}

/// Initializes or restores state, runs the configured stage and returns
/// the final snapshot (also written to `ckpt_path` when given).
///
/// A checkpoint from the same stage resumes its step count and optimizer
/// moments. A checkpoint from a different stage seeds only the parameters;
/// the optimizer and step count start fresh.
pub fn run_stage(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    init_from: Option<&Checkpoint>,
    ckpt_path: Option<&Path>,
    sink: &mut dyn FnMut(&TrainRecord),
) -> Result<Checkpoint> {
    mcfg.validate()?;
    tcfg.validate()?;
    let (mut params, mut adam) = match init_from {
        None => {
            let params = Params::init(mcfg, tcfg.seed);
            let adam = Adam::new(tcfg.adam_config(), &params)?;
            (params, adam)
        }
        Some(ck) => {
            let ck_cfg = ck.model_config()?;
            if ck_cfg != *mcfg {
                return Err(Error::Checkpoint(
                    "checkpoint model config does not match the requested one".into(),
                ));
            }
            let params = ck.to_params(mcfg)?;
            let same_stage =
                ck.meta.get("train.stage").map(String::as_str) == Some(tcfg.stage.as_str());
            let adam = if same_stage {
                let step = match ck.meta.get("train.step") {
                    Some(s) => s
                        .parse::<u64>()
                        .map_err(|_| Error::Checkpoint(format!("bad train.step {s:?}")))?,
                    None => 0,
                };
                Adam::load_from(ck, tcfg.adam_config(), &params, step)?
            } else {
                Adam::new(tcfg.adam_config(), &params)?
            };
            (params, adam)
        }
    };
    run_training(&mut params, &mut adam, mcfg, tcfg, corpus, ckpt_path, sink)?;
    let ck = build_checkpoint(&params, mcfg, tcfg, Some(&adam), adam.step_count());
    if let Some(path) = ckpt_path {
        ck.write(path)?;
    }
    Ok(ck)
}

/// Sentence-level stage: every option collapses to the empty one and the
/// auxiliary losses are off.
pub fn pretrain_sentence(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    init_from: Option<&Checkpoint>,
    ckpt_path: Option<&Path>,
    sink: &mut dyn FnMut(&TrainRecord),
) -> Result<Checkpoint> {
    let mut t = tcfg.clone();
    t.stage = Stage::SentencePretrain;
    run_stage(mcfg, &t, corpus, init_from, ckpt_path, sink)
}

/// Document-level stage with the configured lambda mode and loss weights.
pub fn finetune_document(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    init_from: Option<&Checkpoint>,
    ckpt_path: Option<&Path>,
    sink: &mut dyn FnMut(&TrainRecord),
) -> Result<Checkpoint> {
    let mut t = tcfg.clone();
    t.stage = Stage::DocFinetune;
    run_stage(mcfg, &t, corpus, init_from, ckpt_path, sink)
}
