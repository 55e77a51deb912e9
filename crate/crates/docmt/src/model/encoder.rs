//! Encoder forwards: the plain sentence-level encoder and the context-unit
//! variant that fuses a parallel context stream through gated
//! cross-attention.

use crate::error::{Error, Result};
use crate::model::blocks::{
    attn_mask, attention, embed_sequence, layer_norm_p, self_attn_layer, AttnNames,
};
use crate::model::config::{ModelConfig, Variant};
use crate::model::params::{Params, TapeParams};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Segment ids marking each token's role.
pub const SEG_PRE: usize = 0;
pub const SEG_CUR: usize = 1;
pub const SEG_POS: usize = 2;
pub const SEG_SEP: usize = 3;

/// Hidden states of one encoded sequence.
pub struct EncoderOutput {
    /// `[S × d_model]`, finite.
    pub hidden: Tensor,
    /// True at padding positions.
    pub is_pad: Vec<bool>,
}

pub fn check_sequence(
    tokens: &[usize],
    segments: &[usize],
    is_pad: &[bool],
    cfg: &ModelConfig,
) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("encoder input".into()));
    }
    if tokens.len() != segments.len() {
        return Err(Error::LengthMismatch {
            what: "tokens vs segments",
            left: tokens.len(),
            right: segments.len(),
        });
    }
    if tokens.len() != is_pad.len() {
        return Err(Error::LengthMismatch {
            what: "tokens vs pad mask",
            left: tokens.len(),
            right: is_pad.len(),
        });
    }
    if tokens.len() > cfg.max_len {
        return Err(Error::InputTooLong { len: tokens.len(), max: cfg.max_len });
    }
    if let Some(&id) = tokens.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(Error::VocabId { id, vocab: cfg.vocab_size });
    }
    if segments.iter().any(|&s| s > 3) {
        return Err(Error::Config("segment id out of range".into()));
    }
    if is_pad.iter().all(|&p| p) {
        return Err(Error::EmptyInput("all positions padded".into()));
    }
    Ok(())
}

/// Plain encoder stack on an existing tape.
pub fn encode_on(
    tp: &mut TapeParams,
    tokens: &[usize],
    segments: &[usize],
    is_pad: &[bool],
    cfg: &ModelConfig,
) -> Var {
    let mut x = embed_sequence(tp, tokens, segments, cfg);
    let allowed = attn_mask(is_pad, is_pad, false);
    for l in 0..cfg.encoder_layers() {
        x = self_attn_layer(tp, x, &format!("enc.l{l}"), cfg, &allowed);
    }
    layer_norm_p(tp, x, "enc.final_ln")
}

/// Plain sentence-level encoding (no context stream).
pub fn encode(
    params: &Params,
    cfg: &ModelConfig,
    tokens: &[usize],
    segments: &[usize],
    is_pad: &[bool],
) -> Result<EncoderOutput> {
    check_sequence(tokens, segments, is_pad, cfg)?;
    let mut tp = TapeParams::new(params);
    let h = encode_on(&mut tp, tokens, segments, is_pad, cfg);
    let hidden = tp.tape.value(h).clone();
    hidden.require_finite("encoder output")?;
    Ok(EncoderOutput { hidden, is_pad: is_pad.to_vec() })
}

fn ca_names(layer: usize, option: usize, last: bool) -> AttnNames {
    let p = format!("enc.l{layer}.ca");
    let m = if last { format!("{p}.o{option}") } else { p.clone() };
    AttnNames {
        wq: format!("{m}.wq"),
        wk: format!("{m}.wk"),
        wv: format!("{m}.wv"),
        wo: format!("{m}.wo"),
        bias_prefix: p,
    }
}

/// Context-unit encoder on an existing tape. The main stream reads the
/// source; a parallel stream reads the context sentence; each layer adds
/// the gated cross-attention of the two. Option 2 feeds the source itself
/// through the context stream in place of an empty context.
#[allow(clippy::too_many_arguments)]
pub fn context_unit_on(
    tp: &mut TapeParams,
    src_tokens: &[usize],
    src_pad: &[bool],
    ctx_tokens: &[usize],
    ctx_pad: &[bool],
    option: usize,
    cfg: &ModelConfig,
) -> Var {
    let n_layers = cfg.encoder_layers();
    let src_segments = vec![SEG_CUR; src_tokens.len()];
    let ctx_segment = match option {
        0 => SEG_PRE,
        1 => SEG_POS,
        _ => SEG_CUR,
    };
    let ctx_segments = vec![ctx_segment; ctx_tokens.len()];

    let mut x = embed_sequence(tp, src_tokens, &src_segments, cfg);
    let mut c = embed_sequence(tp, ctx_tokens, &ctx_segments, cfg);
    let src_allowed = attn_mask(src_pad, src_pad, false);
    let ctx_allowed = attn_mask(ctx_pad, ctx_pad, false);
    let cross_allowed = attn_mask(src_pad, ctx_pad, false);

    for l in 0..n_layers {
        x = self_attn_layer(tp, x, &format!("enc.l{l}"), cfg, &src_allowed);
        c = self_attn_layer(tp, c, &format!("cxt.l{l}"), cfg, &ctx_allowed);
        let q = layer_norm_p(tp, x, &format!("enc.l{l}.ca.lnq"));
        let kv = layer_norm_p(tp, c, &format!("enc.l{l}.ca.lnkv"));
        let names = ca_names(l, option, l + 1 == n_layers);
        let fused = attention(tp, q, kv, &names, cfg, &cross_allowed);
        let alpha = tp.var(&format!("alpha.o{option}.l{l}"));
        let gated = tp.tape.scale_var(fused, alpha);
        x = tp.tape.add(x, gated);
    }
    layer_norm_p(tp, x, "enc.final_ln")
}

/// Context-unit encoding. Option 0 takes the previous sentence as context,
/// option 1 the next, option 2 none (source substituted).
pub fn context_unit_forward(
    params: &Params,
    cfg: &ModelConfig,
    src_tokens: &[usize],
    src_pad: &[bool],
    ctx_tokens: &[usize],
    ctx_pad: &[bool],
    option: usize,
) -> Result<EncoderOutput> {
    if cfg.variant != Variant::ContextUnit {
        return Err(Error::VariantMismatch(
            "context_unit_forward requires the context-unit variant".into(),
        ));
    }
    let n = cfg.variant.n_options();
    if option >= n {
        return Err(Error::InvalidOption { option, n_options: n });
    }
    let src_segments = vec![SEG_CUR; src_tokens.len()];
    check_sequence(src_tokens, &src_segments, src_pad, cfg)?;
    let (ctx_tokens, ctx_pad): (&[usize], &[bool]) =
        if option == cfg.variant.empty_option() || ctx_tokens.is_empty() {
            (src_tokens, src_pad)
        } else {
            (ctx_tokens, ctx_pad)
        };
    let ctx_segments = vec![SEG_CUR; ctx_tokens.len()];
    check_sequence(ctx_tokens, &ctx_segments, ctx_pad, cfg)?;

    let mut tp = TapeParams::new(params);
    let h = context_unit_on(&mut tp, src_tokens, src_pad, ctx_tokens, ctx_pad, option, cfg);
    let hidden = tp.tape.value(h).clone();
    hidden.require_finite("context-unit output")?;
    Ok(EncoderOutput { hidden, is_pad: src_pad.to_vec() })
}

/// Mask-prediction logits over every encoder position.
pub fn mask_logits_on(tp: &mut TapeParams, hidden: Var) -> Var {
    crate::model::blocks::linear(tp, hidden, "mask_head.w", "mask_head.b")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Params;
    use crate::rng;
    use rand::Rng;

    fn randomized_params(cfg: &ModelConfig, seed: u64) -> Params {
        // overwrite the zero-init residual outputs so forwards are nontrivial
        let mut params = Params::init(cfg, seed);
        let names: Vec<String> = params
            .names()
            .filter(|n| n.ends_with(".wo") || n.ends_with(".w2"))
            .map(String::from)
            .collect();
        let mut rng = rng::stream(seed, "test.fill");
        for name in names {
            let mut t = params.get(&name).clone();
            for v in t.data_mut() {
                *v = rng.gen_range(-0.3..0.3);
            }
            params.set(&name, t);
        }
        params
    }

    #[test]
    fn encode_shape_and_determinism() {
        let cfg = ModelConfig::default();
        let params = randomized_params(&cfg, 2);
        let tokens = [5, 9, 11, 30, 2];
        let segs = vec![SEG_CUR; 5];
        let pad = vec![false; 5];
        let a = encode(&params, &cfg, &tokens, &segs, &pad).unwrap();
        let b = encode(&params, &cfg, &tokens, &segs, &pad).unwrap();
        assert_eq!(a.hidden.shape(), &[5, cfg.d_model]);
        assert_eq!(a.hidden.data(), b.hidden.data());
    }

    #[test]
    fn encode_rejects_bad_input() {
        let cfg = ModelConfig::default();
        let params = Params::init(&cfg, 2);
        let segs = [SEG_CUR];
        assert!(matches!(
            encode(&params, &cfg, &[], &[], &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            encode(&params, &cfg, &[cfg.vocab_size], &segs, &[false]),
            Err(Error::VocabId { .. })
        ));
        let long = vec![1usize; cfg.max_len + 1];
        let segs = vec![SEG_CUR; long.len()];
        let pad = vec![false; long.len()];
        assert!(matches!(
            encode(&params, &cfg, &long, &segs, &pad),
            Err(Error::InputTooLong { .. })
        ));
    }

    #[test]
    fn alpha_zero_reduces_to_plain_encoder_bitwise() {
        let cfg = ModelConfig::default();
        let params = randomized_params(&cfg, 3); // alpha still zero
        let src = [7, 8, 9, 10];
        let ctx = [20, 21, 22];
        let pad4 = vec![false; 4];
        let pad3 = vec![false; 3];
        let segs = vec![SEG_CUR; 4];
        let plain = encode(&params, &cfg, &src, &segs, &pad4).unwrap();
        for option in 0..3 {
            let fused = context_unit_forward(
                &params, &cfg, &src, &pad4, &ctx, &pad3, option,
            )
            .unwrap();
            assert_eq!(plain.hidden.data(), fused.hidden.data(), "option {option}");
        }
    }

    #[test]
    fn nonzero_alpha_uses_context_and_option_weights() {
        let cfg = ModelConfig::default();
        let mut params = randomized_params(&cfg, 4);
        for o in 0..3 {
            for l in 0..cfg.encoder_layers() {
                params.set(&format!("alpha.o{o}.l{l}"), Tensor::from_vec(&[1], vec![0.5]));
            }
        }
        let src = [7, 8, 9];
        let pad = vec![false; 3];
        let ctx_a = [20, 21];
        let ctx_b = [30, 31];
        let pad2 = vec![false; 2];
        let a = context_unit_forward(&params, &cfg, &src, &pad, &ctx_a, &pad2, 0).unwrap();
        let b = context_unit_forward(&params, &cfg, &src, &pad, &ctx_b, &pad2, 0).unwrap();
        assert_ne!(a.hidden.data(), b.hidden.data(), "context must matter");
        // option 2 replaces the context with the source itself
        let self_ctx = context_unit_forward(&params, &cfg, &src, &pad, &ctx_a, &pad2, 2).unwrap();
        let explicit =
            context_unit_forward(&params, &cfg, &src, &pad, &src, &pad, 2).unwrap();
        assert_eq!(self_ctx.hidden.data(), explicit.hidden.data());
        // last-layer weights differ per option, so options 0 and 1 diverge
        let o0 = context_unit_forward(&params, &cfg, &src, &pad, &ctx_a, &pad2, 0).unwrap();
        let o1 = context_unit_forward(&params, &cfg, &src, &pad, &ctx_a, &pad2, 1).unwrap();
        assert_ne!(o0.hidden.data(), o1.hidden.data());
    }

    #[test]
    fn invalid_option_is_rejected() {
        let cfg = ModelConfig::default();
        let params = Params::init(&cfg, 1);
        let err = context_unit_forward(&params, &cfg, &[5], &[false], &[6], &[false], 3);
        assert!(matches!(err, Err(Error::InvalidOption { option: 3, n_options: 3 })));
    }

    #[test]
    fn encoder_padding_invariance() {
        let cfg = ModelConfig::default();
        let params = randomized_params(&cfg, 6);
        let tokens = [4, 5, 6];
        let segs3 = vec![SEG_CUR; 3];
        let plain = encode(&params, &cfg, &tokens, &segs3, &[false, false, false]).unwrap();
        let padded_tokens = [4, 5, 6, 0, 0];
        let segs5 = vec![SEG_CUR; 5];
        let padded = encode(
            &params,
            &cfg,
            &padded_tokens,
            &segs5,
            &[false, false, false, true, true],
        )
        .unwrap();
        for r in 0..3 {
            for (a, b) in plain.hidden.row(r).iter().zip(padded.hidden.row(r)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
