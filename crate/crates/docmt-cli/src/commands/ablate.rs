//! `ablate`: pretrain once, then finetune and score the removal ladder
//! on a held-out synthetic set. Rows remove components cumulatively,
//! matching the published ladder: the uniformity loss first, then the
//! diversity loss, then the document tips. The full row always runs;
//! later rows that fail are reported in place.

use docmt::config_file::Resolved;
use docmt::corpus::synth;
use docmt::eval::synth_acc::synthetic_accuracy;
use docmt::eval::translate::Policy;
use docmt::eval::corpus_bleu;
use docmt::model::decoder::DecodeMode;
use docmt::trainer::{run_stage, Stage, TrainConfig};

use super::gen_corpus::synth_from_keys;
use super::model_from_keys;
use super::translate_cmd::LoadedModel;
use crate::args::{echo_map, print_config, Cfg, CliError, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    let keys = vec![
        ("seed", "0"),
        ("no-uni", "false"),
        ("no-div", "false"),
        ("no-doc-tips", "false"),
        ("ablate.pretrain_steps", "300"),
        ("decode.max_len", "32"),
        // Corpus sized for minutes, not hours.
        ("synth.n_docs", "60"),
        ("synth.doc_len", "4"),
        ("synth.vocab_size", "64"),
        ("synth.frac_none", "0.15"),
        ("synth.frac_pre", "0.25"),
        ("synth.frac_pos", "0.15"),
        ("synth.frac_both", "0.45"),
        ("synth.min_len", "4"),
        ("synth.max_len", "6"),
        // The published ladder ablates the concatenate model.
        ("model.variant", "concatenate"),
        ("model.d_model", "32"),
        ("model.n_heads", "4"),
        ("model.d_ff", "64"),
        ("model.enc_layers", "2"),
        ("model.dec_layers", "3"),
        ("model.max_len", "64"),
        ("model.dropout", "0"),
        ("train.lr", "0.0003"),
        ("train.adam_beta1", "0.9"),
        ("train.adam_beta2", "0.98"),
        ("train.adam_eps", "1e-9"),
        ("train.warmup", "400"),
        ("train.clip", "1"),
        ("train.batch_size", "16"),
        ("train.max_steps", "300"),
        ("train.log_every", "0"),
        ("train.beta1", "0.5"),
        ("train.beta2", "0.2"),
        ("train.beta3", "0.5"),
        ("train.tau", "1"),
        ("train.mask_rate", "0.15"),
    ];
    CmdSpec {
        name: "ablate",
        about: "train and score the component-removal ladder on a synthetic benchmark",
        keys,
        required: &[],
    }
}

struct RowScores {
    bleu: f64,
    ambiguous: f64,
    agreement: f64,
    decode_failures: usize,
}

/// Ladder stages: cumulative flags per row label.
const LADDER: &[(&str, [bool; 3])] = &[
    ("full", [false, false, false]),
    ("w/o L_uni", [true, false, false]),
    ("w/o L_div", [true, true, false]),
    ("w/o Doc tips", [true, true, true]),
];

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let scfg = synth_from_keys(r)?;
    let seed = c.u64("seed")?;
    let base = TrainConfig {
        stage: Stage::DocFinetune,
        lr: c.f64("train.lr")?,
        adam_beta1: c.f64("train.adam_beta1")?,
        adam_beta2: c.f64("train.adam_beta2")?,
        adam_eps: c.f64("train.adam_eps")?,
        warmup: c.u64("train.warmup")?,
        clip: c.f64("train.clip")?,
        batch_size: c.usize("train.batch_size")?,
        max_steps: c.u64("train.max_steps")?,
        log_every: c.u64("train.log_every")?,
        seed,
        weights: docmt::losses::LossWeights {
            beta1: c.f64("train.beta1")?,
            beta2: c.f64("train.beta2")?,
            beta3: c.f64("train.beta3")?,
        },
        tau: c.f64("train.tau")?,
        mask_rate: c.f64("train.mask_rate")?,
        ..TrainConfig::default()
    };
    base.validate().map_err(crate::args::usage_err)?;
    let pretrain_steps = c.u64("ablate.pretrain_steps")?;
    let max_len = c.usize("decode.max_len")?;

    // Switches pick ladder rows; none given means the whole ladder.
    let picked = [c.bool("no-uni")?, c.bool("no-div")?, c.bool("no-doc-tips")?];
    let any = picked.iter().any(|p| *p);
    let rows: Vec<usize> = (0..LADDER.len())
        .filter(|&i| i == 0 || !any || picked[i - 1])
        .collect();

    let (vocab, train_corpus, _) = synth::generate(seed, &scfg)?;
    let (eval_vocab, eval_corpus, eval_labels) = synth::generate(seed.wrapping_add(1), &scfg)?;
    assert_eq!(vocab.len(), eval_vocab.len());
    let mcfg = model_from_keys(r, vocab.len())?;

    let mut echo = echo_map(r);
    echo.extend(mcfg.to_kv());
    print_config("ablate", &echo);

    let mut quiet = |_: &docmt::trainer::TrainRecord| {};
    let pre_cfg = TrainConfig {
        stage: Stage::SentencePretrain,
        max_steps: pretrain_steps,
        ..base.clone()
    };
    let pretrained = run_stage(&mcfg, &pre_cfg, &train_corpus, None, None, &mut quiet)?;

    let mut results: Vec<(&str, Result<RowScores, String>)> = Vec::new();
    for &i in &rows {
        let (label, [no_uni, no_div, no_doc_tips]) = LADDER[i];
        let tcfg = TrainConfig { no_uni, no_div, no_doc_tips, ..base.clone() };
        let scored = (|| -> Result<RowScores, docmt::Error> {
            let ck = run_stage(&mcfg, &tcfg, &train_corpus, Some(&pretrained), None, &mut quiet)?;
            let model = LoadedModel {
                params: ck.to_params(&mcfg)?,
                mcfg: mcfg.clone(),
                no_doc_tips,
            };
            let out = docmt::eval::translate_corpus(
                &model.params,
                &model.mcfg,
                model.no_doc_tips,
                &eval_corpus,
                Policy::Adaptive,
                DecodeMode::Greedy,
                max_len,
            )?;
            let hyps: Vec<Vec<usize>> = out.hypotheses.iter().flatten().cloned().collect();
            let refs: Vec<Vec<usize>> = eval_corpus
                .documents
                .iter()
                .flat_map(|d| d.sentences.iter().map(|p| p.tgt.clone()))
                .collect();
            let bleu = corpus_bleu(&hyps, &refs, false)?;
            let acc = synthetic_accuracy(
                &out.hypotheses,
                &eval_corpus,
                &eval_labels,
                &out.selections,
                &vocab,
                mcfg.variant,
            )?;
            Ok(RowScores {
                bleu,
                ambiguous: acc.ambiguous_accuracy(),
                agreement: acc.agreement(),
                decode_failures: out.failures.len(),
            })
        })();
        match scored {
            Ok(s) => results.push((label, Ok(s))),
            Err(e) if label == "full" => {
                return Err(CliError::Runtime(format!("full configuration failed: {e}")))
            }
            Err(e) => results.push((label, Err(e.to_string()))),
        }
    }

    println!("{:<14}  {:>8}  {:>9}  {:>9}", "", "bleu", "amb acc", "agreement");
    for (label, res) in &results {
        match res {
            Ok(s) => println!(
                "{label:<14}  {:>8.2}  {:>9.4}  {:>9.4}",
                s.bleu, s.ambiguous, s.agreement
            ),
            Err(msg) => println!("{label:<14}  failed: {msg}"),
        }
    }
    println!();
    for (i, (label, res)) in results.iter().enumerate() {
        println!("ablate.row{i}.label = {label}");
        match res {
            Ok(s) => {
                println!("ablate.row{i}.bleu = {:.4}", s.bleu);
                println!("ablate.row{i}.ambiguous = {:.4}", s.ambiguous);
                println!("ablate.row{i}.agreement = {:.4}", s.agreement);
                println!("ablate.row{i}.decode_failures = {}", s.decode_failures);
            }
            Err(msg) => println!("ablate.row{i}.error = {msg}"),
        }
    }
    Ok(())
}
