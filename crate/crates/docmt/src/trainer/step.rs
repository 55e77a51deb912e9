//! Builds the joint objective for one batch and accumulates its gradients.
//!
//! Each sentence gets its own tape holding its option forwards, the
//! predictor routing, and its share of the per-sentence losses. The
//! diversity loss couples sentences through the batch mean of pi, so its
//! gradient is computed analytically once all forwards are done and
//! injected as an extra backward seed on each sentence's pi node.

use std::collections::BTreeMap;

use crate::corpus::io::DocumentCorpus;
use crate::corpus::masking::apply_source_mask;
use crate::corpus::variants::{build_variants, strip_doc_tips};
use crate::error::{Error, Result};
use crate::losses::{diversity_grad, diversity_loss, LossBreakdown};
use crate::model::config::ModelConfig;
use crate::model::decoder::forward_variant_on;
use crate::model::encoder::mask_logits_on;
use crate::model::params::{Params, TapeParams};
use crate::predictor::{route_on, sample_gumbel};
use crate::rng;
use crate::tape::Var;
use crate::tensor::Tensor;
use crate::trainer::{LambdaMode, TrainConfig};

pub struct StepOutcome {
    /// Batch-mean gradients keyed by parameter name. Empty when gradients
    /// were not requested.
    pub grads: BTreeMap<String, Tensor>,
    /// Batch-level loss summary under the effective weights.
    pub breakdown: LossBreakdown,
    /// Per-sentence pi; empty unless lambda is learned.
    pub batch_pis: Vec<Vec<f64>>,
}

struct SentenceBuild<'a> {
    tp: TapeParams<'a>,
    /// Per-sentence scalar seeded with 1/B: weighted MT plus uniformity
    /// and mask terms. The diversity term is seeded through `pi`.
    local: Var,
    pi: Option<Var>,
    pi_value: Vec<f64>,
    lambda_value: Vec<f64>,
    nll_values: Vec<f64>,
    mt_value: f64,
    uni_value: f64,
    mask_value: f64,
}

fn build_sentence<'a>(
    params: &'a Params,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    doc_idx: usize,
    sent_idx: usize,
    step: u64,
) -> Result<SentenceBuild<'a>> {
    let n = cfg.variant.n_options();
    let mode = tcfg.effective_lambda(cfg.variant);
    let weights = tcfg.effective_weights();
    let mask_rate = tcfg.effective_mask_rate();

    let mut variants = build_variants(corpus, doc_idx, sent_idx, cfg.variant)?;
    if tcfg.no_doc_tips {
        for v in variants.iter_mut() {
            strip_doc_tips(v);
        }
    }

    let mut tp = TapeParams::new(params);
    let mut nll_values = vec![f64::NAN; n];
    let mut nll_vars: Vec<Var> = Vec::new();
    let active: Vec<usize> = match mode {
        LambdaMode::OneHot(k) => {
            if k >= n {
                return Err(Error::InvalidOption { option: k, n_options: n });
            }
            vec![k]
        }
        _ => (0..n).collect(),
    };
    let mut empty_hidden: Option<(Var, usize)> = None;
    for &o in &active {
        let v = &variants[o];
        let fwd = forward_variant_on(&mut tp, v, cfg)?;
        let nll =
            tp.tape.nll_masked(fwd.log_probs, v.tgt_ids.clone(), v.tgt_loss_mask.clone());
        nll_values[o] = tp.tape.value(nll).item();
        nll_vars.push(nll);
        if o == cfg.variant.empty_option() {
            empty_hidden = Some((fwd.encoder_hidden, v.src_ids.len()));
        }
    }

    // Predictor routing over the pooled source-only encoding.
    let needs_predictor = mode == LambdaMode::Learned;
    let (pi, pi_value, lambda_node, lambda_value, log_pi) = if needs_predictor {
        let (hidden, src_len) =
            empty_hidden.expect("learned mode runs every option, including empty");
        let pooled = tp.tape.mean_rows_masked(hidden, vec![true; src_len]);
        let mut grng =
            rng::stream(tcfg.seed, &format!("gumbel.s{step}.d{doc_idx}.i{sent_idx}"));
        let gumbel = sample_gumbel(n, &mut grng);
        let routing = route_on(&mut tp, pooled, &gumbel, tcfg.tau);
        let pi_value = tp.tape.value(routing.pi).data().to_vec();
        let lambda_value = tp.tape.value(routing.lambda_).data().to_vec();
        (Some(routing.pi), pi_value, Some(routing.lambda_), lambda_value, Some(routing.log_pi))
    } else {
        let lambda_value = match mode {
            LambdaMode::Uniform => vec![1.0 / n as f64; n],
            LambdaMode::OneHot(k) => {
                let mut l = vec![0.0; n];
                l[k] = 1.0;
                l
            }
            LambdaMode::Learned => unreachable!(),
        };
        (None, Vec::new(), None, lambda_value, None)
    };

    // The MT loss is the lambda-weighted sum of per-option losses.
    let l_mt = match lambda_node {
        Some(lam) => tp.tape.weighted_sum_scalars(lam, &nll_vars),
        None => {
            let mut acc: Option<Var> = None;
            for (pos, &o) in active.iter().enumerate() {
                let w = lambda_value[o];
                if w == 0.0 {
                    continue;
                }
                let term = tp.tape.scale_const(nll_vars[pos], w);
                acc = Some(match acc {
                    Some(a) => tp.tape.add(a, term),
                    None => term,
                });
            }
            acc.ok_or_else(|| Error::Config("lambda weights are all zero".into()))?
        }
    };
    let mt_value = tp.tape.value(l_mt).item();

    let mut local = l_mt;
    let mut uni_value = 0.0;
    if weights.beta2 != 0.0 {
        let lp = log_pi.expect("uniformity needs the learned predictor");
        let s = tp.tape.sum(lp);
        let scaled = tp.tape.scale_const(s, 1.0 / n as f64);
        let u = tp.tape.add_const(scaled, Tensor::scalar((n as f64).ln()));
        uni_value = tp.tape.value(u).item();
        let weighted = tp.tape.scale_const(u, weights.beta2);
        local = tp.tape.add(local, weighted);
    }

    let mut mask_value = 0.0;
    if weights.beta3 != 0.0 && mask_rate > 0.0 {
        let empty = &variants[cfg.variant.empty_option()];
        let mut mrng =
            rng::stream(tcfg.seed, &format!("mask.s{step}.d{doc_idx}.i{sent_idx}"));
        let (masked, mask) = apply_source_mask(empty, mask_rate, cfg.vocab_size, &mut mrng);
        if !mask.positions.is_empty() {
            let hidden = crate::model::decoder::encode_variant_on(&mut tp, &masked, cfg)?;
            let logits = mask_logits_on(&mut tp, hidden);
            let log_probs = tp.tape.log_softmax(logits);
            let len = masked.src_ids.len();
            let mut targets = vec![0usize; len];
            let mut scored = vec![false; len];
            for (&pos, &orig) in mask.positions.iter().zip(&mask.original) {
                targets[pos] = orig;
                scored[pos] = true;
            }
            let m = tp.tape.nll_masked(log_probs, targets, scored);
            mask_value = tp.tape.value(m).item();
            let weighted = tp.tape.scale_const(m, weights.beta3);
            local = tp.tape.add(local, weighted);
        }
    }

    Ok(SentenceBuild {
        tp,
        local,
        pi,
        pi_value,
        lambda_value,
        nll_values,
        mt_value,
        uni_value,
        mask_value,
    })
}

/// Forwards, losses and (optionally) accumulated gradients for one batch.
/// Gradients are normalized by the batch size, matching the reported
/// batch-mean loss.
pub fn batch_step(
    params: &Params,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    batch: &[(usize, usize)],
    step: u64,
    want_grads: bool,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("training batch".into()));
    }
    let n = cfg.variant.n_options();
    let weights = tcfg.effective_weights();
    let b = batch.len() as f64;

    let mut built = Vec::with_capacity(batch.len());
    for &(d, s) in batch {
        built.push(build_sentence(params, cfg, tcfg, corpus, d, s, step)?);
    }

    let batch_pis: Vec<Vec<f64>> =
        built.iter().filter(|sb| sb.pi.is_some()).map(|sb| sb.pi_value.clone()).collect();
    let l_div = if batch_pis.is_empty() { 0.0 } else { diversity_loss(&batch_pis)? };
    let div_grads = if batch_pis.is_empty() || weights.beta1 == 0.0 {
        Vec::new()
    } else {
        diversity_grad(&batch_pis, weights.beta1)?
    };

    let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
    if want_grads {
        let mut pi_row = 0usize;
        for sb in &built {
            let mut seeds = vec![(sb.local, Tensor::scalar(1.0 / b))];
            if let Some(pi) = sb.pi {
                if !div_grads.is_empty() {
                    let row = &div_grads[pi_row];
                    seeds.push((pi, Tensor::from_vec(&[1, n], row.clone())));
                }
                pi_row += 1;
            }
            let g = sb.tp.tape.backward_seeded(&seeds);
            for (name, var) in sb.tp.bound() {
                if let Some(gt) = g.get(var) {
                    match grads.get_mut(name) {
                        Some(acc) => acc.add_assign(gt),
                        None => {
                            grads.insert(name.to_string(), gt.clone());
                        }
                    }
                }
            }
        }
    }

    let mut per_option_nll = vec![0.0; n];
    let mut per_option_count = vec![0usize; n];
    for sb in &built {
        for o in 0..n {
            if sb.nll_values[o].is_finite() {
                per_option_nll[o] += sb.nll_values[o];
                per_option_count[o] += 1;
            }
        }
    }
    for o in 0..n {
        per_option_nll[o] =
            if per_option_count[o] > 0 { per_option_nll[o] / per_option_count[o] as f64 } else { f64::NAN };
    }
    let mut lambda_mean = vec![0.0; n];
    for sb in &built {
        for (acc, &l) in lambda_mean.iter_mut().zip(&sb.lambda_value) {
            *acc += l / b;
        }
    }
    let l_mt = built.iter().map(|sb| sb.mt_value).sum::<f64>() / b;
    let l_uni = built.iter().map(|sb| sb.uni_value).sum::<f64>() / b;
    let l_mask = built.iter().map(|sb| sb.mask_value).sum::<f64>() / b;
    let total = crate::losses::total_loss(l_mt, l_div, l_uni, l_mask, &weights);

    Ok(StepOutcome {
        grads,
        breakdown: LossBreakdown {
            per_option_nll,
            lambda_: lambda_mean,
            l_mt,
            l_div,
            l_uni,
            l_mask,
            total,
        },
        batch_pis,
    })
}
