//! `gradcheck`: backward pass of the full training objective against
//! central finite differences on a small built-in corpus, plus the exact
//! linear-head subcase.

use docmt::config_file::Resolved;
use docmt::corpus::synth::{self, SynthConfig};
use docmt::losses::LossWeights;
use docmt::trainer::{grad_check, linear_head_check, LambdaMode, Stage, TrainConfig};

use super::{model_from_keys, MODEL_KEYS};
use crate::args::{echo_map, print_config, usage_err, Cfg, CliError, CliResult, CmdSpec};

pub fn spec() -> CmdSpec {
    let mut keys = vec![
        ("seed", "0"),
        ("check.samples", "120"),
        ("check.epsilon", "1e-5"),
        ("check.tolerance", "0.0001"),
        ("check.linear_tolerance", "1e-8"),
        ("train.batch_size", "4"),
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
    keys.extend_from_slice(MODEL_KEYS);
    CmdSpec {
        name: "gradcheck",
        about: "finite-difference check of the training gradient on a built-in corpus",
        keys,
        required: &[],
    }
}

pub fn run(r: &Resolved) -> CliResult<()> {
    let c = Cfg(r);
    let seed = c.u64("seed")?;
    let samples = c.usize("check.samples")?;
    let epsilon = c.f64("check.epsilon")?;
    let tolerance = c.f64("check.tolerance")?;
    let linear_tolerance = c.f64("check.linear_tolerance")?;
    if samples == 0 || epsilon <= 0.0 {
        return Err(CliError::Usage("check.samples and check.epsilon must be positive".into()));
    }

    // Tiny fixed corpus; large enough for every option to occur.
    let scfg = SynthConfig { n_docs: 3, doc_len: 3, vocab_size: 24, ..SynthConfig::default() };
    let (vocab, corpus, _) = synth::generate(seed, &scfg)?;
    let mcfg = model_from_keys(r, vocab.len())?;
    let tcfg = TrainConfig {
        stage: Stage::DocFinetune,
        batch_size: c.usize("train.batch_size")?,
        seed,
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
        ..TrainConfig::default()
    };
    tcfg.validate().map_err(usage_err)?;

    let mut echo = echo_map(r);
    echo.extend(mcfg.to_kv());
    print_config("gradcheck", &echo);

    let linear = linear_head_check(epsilon);
    println!("gradcheck.linear_max_rel = {linear:.3e}");

    let mut batch = corpus.sentence_indices();
    batch.truncate(tcfg.batch_size);
    let report = grad_check(&mcfg, &tcfg, &corpus, &batch, samples, epsilon, seed)?;
    println!("gradcheck.checked = {}", report.checked);
    println!("gradcheck.max_rel = {:.3e}", report.max_rel);
    println!("gradcheck.mean_rel = {:.3e}", report.mean_rel);
    println!("gradcheck.worst_param = {}", report.worst_param);
    println!("gradcheck.worst_index = {}", report.worst_index);
    println!("gradcheck.worst_analytic = {:.12e}", report.worst_analytic);
    println!("gradcheck.worst_numeric = {:.12e}", report.worst_numeric);

    if linear > linear_tolerance {
        return Err(CliError::Runtime(format!(
            "linear head gradient off by {linear:.3e}, tolerance {linear_tolerance:.3e}"
        )));
    }
    if report.max_rel > tolerance {
        return Err(CliError::Runtime(format!(
            "gradient check failed: max relative error {:.3e} over tolerance {tolerance:.3e}",
            report.max_rel
        )));
    }
    println!("gradcheck PASS");
    Ok(())
}
