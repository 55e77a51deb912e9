//! Decoder stack with option-dependent depth, the full per-variant
//! forward, and greedy/beam decoding with forced prefixes.

use crate::corpus::variants::ContextVariant;
use crate::corpus::vocab::{BOS, EOS};
use crate::error::{Error, Result};
use crate::model::blocks::{attn_mask, attention, embed_sequence, ffn, layer_norm_p, linear, AttnNames};
use crate::model::config::{ModelConfig, Variant};
use crate::model::encoder::{check_sequence, context_unit_on, encode_on};
use crate::model::params::{Params, TapeParams};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Decoder stack over an encoded memory. Runs exactly `depth` layers and
/// reports the count, so depth contracts are checkable from outside.
#[allow(clippy::too_many_arguments)]
pub fn decoder_on(
    tp: &mut TapeParams,
    input_ids: &[usize],
    input_segments: &[usize],
    input_pad: &[bool],
    memory: Var,
    memory_pad: &[bool],
    depth: usize,
    cfg: &ModelConfig,
) -> (Var, usize) {
    let mut x = embed_sequence(tp, input_ids, input_segments, cfg);
    let self_allowed = attn_mask(input_pad, input_pad, true);
    let cross_allowed = attn_mask(input_pad, memory_pad, false);
    let mut executed = 0usize;
    for l in 0..depth {
        let p = format!("dec.l{l}");
        let normed = layer_norm_p(tp, x, &format!("{p}.ln1"));
        let names = AttnNames::unified(&format!("{p}.attn"));
        let att = attention(tp, normed, normed, &names, cfg, &self_allowed);
        x = tp.tape.add(x, att);
        let normed = layer_norm_p(tp, x, &format!("{p}.ln2"));
        let names = AttnNames::unified(&format!("{p}.xattn"));
        let att = attention(tp, normed, memory, &names, cfg, &cross_allowed);
        x = tp.tape.add(x, att);
        let normed = layer_norm_p(tp, x, &format!("{p}.ln3"));
        let f = ffn(tp, normed, &format!("{p}.ffn"));
        x = tp.tape.add(x, f);
        executed += 1;
    }
    (layer_norm_p(tp, x, "dec.final_ln"), executed)
}

/// Next-token logits over every decoder position.
pub fn logits_on(tp: &mut TapeParams, dec_hidden: Var) -> Var {
    linear(tp, dec_hidden, "out_proj.w", "out_proj.b")
}

/// Teacher-forcing input: `<bos>` then the labels shifted right.
pub fn shift_right(tgt_ids: &[usize], tgt_segments: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut ids = Vec::with_capacity(tgt_ids.len());
    let mut segs = Vec::with_capacity(tgt_ids.len());
    ids.push(BOS);
    ids.extend_from_slice(&tgt_ids[..tgt_ids.len() - 1]);
    segs.push(tgt_segments[0]);
    segs.extend_from_slice(&tgt_segments[..tgt_segments.len() - 1]);
    (ids, segs)
}

/// All tape nodes of one option's full forward.
pub struct OptionForward {
    pub encoder_hidden: Var,
    pub logits: Var,
    pub log_probs: Var,
    pub decoder_layers_executed: usize,
}

/// Encodes the variant's source per the model kind.
pub fn encode_variant_on(
    tp: &mut TapeParams,
    variant: &ContextVariant,
    cfg: &ModelConfig,
) -> Result<Var> {
    let src_pad = vec![false; variant.src_ids.len()];
    check_sequence(&variant.src_ids, &variant.src_segments, &src_pad, cfg)?;
    match cfg.variant {
        Variant::Concatenate => {
            Ok(encode_on(tp, &variant.src_ids, &variant.src_segments, &src_pad, cfg))
        }
        Variant::ContextUnit => {
            if variant.option >= cfg.variant.n_options() {
                return Err(Error::InvalidOption {
                    option: variant.option,
                    n_options: cfg.variant.n_options(),
                });
            }
            let (ctx, ctx_pad): (&[usize], Vec<bool>) = if variant.ctx_ids.is_empty() {
                (&variant.src_ids, src_pad.clone())
            } else {
                (&variant.ctx_ids, vec![false; variant.ctx_ids.len()])
            };
            let ctx_segs = vec![crate::model::encoder::SEG_CUR; ctx.len()];
            check_sequence(ctx, &ctx_segs, &ctx_pad, cfg)?;
            Ok(context_unit_on(
                tp,
                &variant.src_ids,
                &src_pad,
                ctx,
                &ctx_pad,
                variant.option,
                cfg,
            ))
        }
    }
}

/// Full teacher-forced forward of one context variant: encode, decode at
/// the option's depth, project, log-softmax.
pub fn forward_variant_on(
    tp: &mut TapeParams,
    variant: &ContextVariant,
    cfg: &ModelConfig,
) -> Result<OptionForward> {
    let depth = cfg
        .dec_layers
        .checked_sub(variant.dec_depth_delta)
        .filter(|&d| d >= 1)
        .ok_or_else(|| {
            Error::Config(format!(
                "depth reduction {} leaves no decoder layers of {}",
                variant.dec_depth_delta, cfg.dec_layers
            ))
        })?;
    if variant.tgt_ids.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let encoder_hidden = encode_variant_on(tp, variant, cfg)?;
    let (in_ids, in_segs) = shift_right(&variant.tgt_ids, &variant.tgt_segments);
    let in_pad = vec![false; in_ids.len()];
    check_sequence(&in_ids, &in_segs, &in_pad, cfg)?;
    let mem_pad = vec![false; variant.src_ids.len()];
    let (hidden, executed) =
        decoder_on(tp, &in_ids, &in_segs, &in_pad, encoder_hidden, &mem_pad, depth, cfg);
    let logits = logits_on(tp, hidden);
    let log_probs = tp.tape.log_softmax(logits);
    Ok(OptionForward { encoder_hidden, logits, log_probs, decoder_layers_executed: executed })
}

/// Value-level forward: next-token logits for a teacher-forced variant,
/// plus the executed decoder depth.
pub fn concat_forward(
    params: &Params,
    cfg: &ModelConfig,
    variant: &ContextVariant,
) -> Result<(Tensor, usize)> {
    let mut tp = TapeParams::new(params);
    let fwd = forward_variant_on(&mut tp, variant, cfg)?;
    let logits = tp.tape.value(fwd.logits).clone();
    logits.require_finite("decoder logits")?;
    Ok((logits, fwd.decoder_layers_executed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone)]
struct Beam {
    tokens: Vec<usize>,
    log_prob: f64,
    done: bool,
}

/// Autoregressive decoding of one variant. The output starts with the
/// forced prefix verbatim and excludes `<eos>`; callers strip context by
/// the prefix length. `max_len` caps the freely generated tokens.
pub fn decode(
    params: &Params,
    cfg: &ModelConfig,
    variant: &ContextVariant,
    mode: DecodeMode,
    max_len: usize,
) -> Result<Vec<usize>> {
    let width = match mode {
        DecodeMode::Greedy => 1,
        DecodeMode::Beam(k) => {
            if k == 0 {
                return Err(Error::Decode("beam width must be at least 1".into()));
            }
            k
        }
    };
    if variant.src_ids.is_empty() {
        return Err(Error::Decode("empty encoder input".into()));
    }
    let memory = {
        let mut tp = TapeParams::new(params);
        let h = encode_variant_on(&mut tp, variant, cfg)?;
        tp.tape.value(h).clone()
    };
    memory.require_finite("encoder memory")?;
    let mem_pad = vec![false; variant.src_ids.len()];

    let depth = cfg.dec_layers - variant.dec_depth_delta;
    let prefix = &variant.forced_tgt_prefix;
    // decoder input never exceeds max_len; the cap below keeps it legal
    let budget = cfg
        .max_len
        .saturating_sub(1 + prefix.len())
        .min(max_len);
    if budget == 0 {
        return Err(Error::InputTooLong { len: prefix.len() + 1, max: cfg.max_len });
    }

    let mut beams = vec![Beam { tokens: Vec::new(), log_prob: 0.0, done: false }];
    for _ in 0..budget {
        if beams.iter().all(|b| b.done) {
            break;
        }
        let mut candidates: Vec<Beam> = Vec::new();
        for beam in &beams {
            if beam.done {
                candidates.push(beam.clone());
                continue;
            }
            let mut input = Vec::with_capacity(1 + prefix.len() + beam.tokens.len());
            input.push(BOS);
            input.extend_from_slice(prefix);
            input.extend_from_slice(&beam.tokens);
            // input position i holds label i-1; BOS mirrors the first label,
            // freely generated positions are current-sentence
            let segs: Vec<usize> = (0..input.len())
                .map(|i| {
                    let label_idx = i.saturating_sub(1);
                    if label_idx < prefix.len() && label_idx < variant.tgt_segments.len() {
                        variant.tgt_segments[label_idx]
                    } else {
                        crate::model::encoder::SEG_CUR
                    }
                })
                .collect();
            let pad = vec![false; input.len()];
            let mut tp = TapeParams::new(params);
            let mem = tp.tape.constant(memory.clone());
            let (hidden, _) = decoder_on(&mut tp, &input, &segs, &pad, mem, &mem_pad, depth, cfg);
            let logits = logits_on(&mut tp, hidden);
            let lp = tp.tape.log_softmax(logits);
            let row = tp.tape.value(lp).row(input.len() - 1).to_vec();
            let mut ranked: Vec<usize> = (0..row.len()).collect();
            ranked.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            for &tok in ranked.iter().take(width) {
                let mut next = beam.clone();
                next.log_prob += row[tok];
                if tok == EOS {
                    next.done = true;
                } else {
                    next.tokens.push(tok);
                }
                candidates.push(next);
            }
        }
        candidates.sort_by(|a, b| {
            b.log_prob.partial_cmp(&a.log_prob).unwrap().then(a.tokens.cmp(&b.tokens))
        });
        candidates.truncate(width);
        beams = candidates;
    }
    let best = beams
        .into_iter()
        .max_by(|a, b| a.log_prob.partial_cmp(&b.log_prob).unwrap())
        .ok_or_else(|| Error::Decode("no beam survived".into()))?;
    let mut out = prefix.clone();
    out.extend(best.tokens);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::SEP;
    use crate::model::encoder::{SEG_CUR, SEG_PRE, SEG_SEP};

    fn concat_cfg() -> ModelConfig {
        ModelConfig {
            variant: Variant::Concatenate,
            dec_layers: 3,
            ..ModelConfig::default()
        }
    }

    fn plain_variant(src: &[usize], tgt: &[usize]) -> ContextVariant {
        let mut tgt_ids = tgt.to_vec();
        tgt_ids.push(EOS);
        let n = tgt_ids.len();
        ContextVariant {
            option: 0,
            src_ids: src.to_vec(),
            src_segments: vec![SEG_CUR; src.len()],
            ctx_ids: vec![],
            tgt_ids,
            tgt_segments: vec![SEG_CUR; n],
            tgt_loss_mask: vec![true; n],
            forced_tgt_prefix: vec![],
            dec_depth_delta: 2,
        }
    }

    #[test]
    fn depth_schedule_is_instrumented() {
        let cfg = concat_cfg();
        let params = Params::init(&cfg, 1);
        for (delta, want) in [(2usize, 1usize), (1, 2), (0, 3)] {
            let mut v = plain_variant(&[10, 11], &[12]);
            v.dec_depth_delta = delta;
            let (logits, executed) = concat_forward(&params, &cfg, &v).unwrap();
            assert_eq!(executed, want, "delta {delta}");
            assert_eq!(logits.shape(), &[2, cfg.vocab_size]);
        }
    }

    #[test]
    fn shift_right_layout() {
        let (ids, segs) = shift_right(&[20, 21, SEP, 22, EOS], &[SEG_PRE, SEG_PRE, SEG_SEP, SEG_CUR, SEG_CUR]);
        assert_eq!(ids, vec![BOS, 20, 21, SEP, 22]);
        assert_eq!(segs, vec![SEG_PRE, SEG_PRE, SEG_PRE, SEG_SEP, SEG_CUR]);
    }

    #[test]
    fn excess_depth_reduction_errors() {
        let cfg = concat_cfg();
        let params = Params::init(&cfg, 1);
        let mut v = plain_variant(&[10], &[11]);
        v.dec_depth_delta = 3;
        assert!(concat_forward(&params, &cfg, &v).is_err());
    }

    #[test]
    fn greedy_equals_beam_one_and_prefix_is_verbatim() {
        let cfg = concat_cfg();
        let params = Params::init(&cfg, 9);
        let mut v = plain_variant(&[10, 11, 12], &[13, 14]);
        v.forced_tgt_prefix = vec![30, 31];
        let g = decode(&params, &cfg, &v, DecodeMode::Greedy, 8).unwrap();
        let b = decode(&params, &cfg, &v, DecodeMode::Beam(1), 8).unwrap();
        assert_eq!(g, b);
        assert_eq!(&g[..2], &[30, 31]);
    }

    #[test]
    fn decode_respects_budget_and_rejects_empty_source() {
        let cfg = concat_cfg();
        let params = Params::init(&cfg, 9);
        let v = plain_variant(&[10, 11], &[13]);
        let out = decode(&params, &cfg, &v, DecodeMode::Greedy, 3).unwrap();
        assert!(out.len() <= 3);
        let mut empty = v.clone();
        empty.src_ids.clear();
        empty.src_segments.clear();
        assert!(decode(&params, &cfg, &empty, DecodeMode::Greedy, 3).is_err());
    }

    #[test]
    fn beam_width_zero_is_rejected() {
        let cfg = concat_cfg();
        let params = Params::init(&cfg, 9);
        let v = plain_variant(&[10], &[11]);
        assert!(matches!(
            decode(&params, &cfg, &v, DecodeMode::Beam(0), 4),
            Err(Error::Decode(_))
        ));
    }
}
