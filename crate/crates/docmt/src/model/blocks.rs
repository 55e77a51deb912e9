//! Shared transformer building blocks: embeddings, attention, feed-forward
//! and the pre-norm residual layers both stacks are made of.

use crate::model::config::ModelConfig;
use crate::model::params::TapeParams;
use crate::tape::Var;
use crate::tensor::Tensor;

pub const LN_EPS: f64 = 1e-5;

/// Fixed sinusoidal position encodings for `s` positions.
pub fn sinusoidal_positions(s: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(&[s, d]);
    for pos in 0..s {
        for i in 0..d / 2 {
            let freq = 10000f64.powf(-2.0 * i as f64 / d as f64);
            let angle = pos as f64 * freq;
            t.data_mut()[pos * d + 2 * i] = angle.sin();
            t.data_mut()[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    t
}

/// Token + position + segment embedding of one sequence.
pub fn embed_sequence(
    tp: &mut TapeParams,
    tokens: &[usize],
    segments: &[usize],
    cfg: &ModelConfig,
) -> Var {
    let tok_table = tp.var("embed.tok");
    let seg_table = tp.var("embed.seg");
    let tok = tp.tape.embed(tokens.to_vec(), tok_table);
    let tok = tp.tape.scale_const(tok, (cfg.d_model as f64).sqrt());
    let seg = tp.tape.embed(segments.to_vec(), seg_table);
    let ts = tp.tape.add(tok, seg);
    let pos = sinusoidal_positions(tokens.len(), cfg.d_model);
    tp.tape.add_const(ts, pos)
}

/// Attention keep-mask: query i may attend key j when both are live and,
/// under causal masking, j is not in i's future.
pub fn attn_mask(q_pad: &[bool], k_pad: &[bool], causal: bool) -> Vec<bool> {
    let (sq, sk) = (q_pad.len(), k_pad.len());
    let mut allowed = vec![false; sq * sk];
    for i in 0..sq {
        if q_pad[i] {
            continue;
        }
        for j in 0..sk {
            allowed[i * sk + j] = !k_pad[j] && (!causal || j <= i);
        }
    }
    allowed
}

pub fn layer_norm_p(tp: &mut TapeParams, x: Var, prefix: &str) -> Var {
    let gain = tp.var(&format!("{prefix}.gain"));
    let bias = tp.var(&format!("{prefix}.bias"));
    tp.tape.layer_norm(x, gain, bias, LN_EPS)
}

pub fn linear(tp: &mut TapeParams, x: Var, w: &str, b: &str) -> Var {
    let wv = tp.var(w);
    let bv = tp.var(b);
    let y = tp.tape.matmul(x, wv);
    tp.tape.add_row(y, bv)
}

/// Parameter names for one attention instance. Matrices and biases are
/// addressed separately because the context-unit fusion duplicates the
/// matrices per option while sharing the biases.
pub struct AttnNames {
    pub wq: String,
    pub wk: String,
    pub wv: String,
    pub wo: String,
    pub bias_prefix: String,
}

impl AttnNames {
    /// The common case: matrices and biases under one prefix.
    pub fn unified(prefix: &str) -> AttnNames {
        AttnNames {
            wq: format!("{prefix}.wq"),
            wk: format!("{prefix}.wk"),
            wv: format!("{prefix}.wv"),
            wo: format!("{prefix}.wo"),
            bias_prefix: prefix.to_string(),
        }
    }
}

/// Multi-head attention. `allowed` is the row-major [sq × skv] keep-mask.
pub fn attention(
    tp: &mut TapeParams,
    q_in: Var,
    kv_in: Var,
    names: &AttnNames,
    cfg: &ModelConfig,
    allowed: &[bool],
) -> Var {
    let q = linear(tp, q_in, &names.wq, &format!("{}.bq", names.bias_prefix));
    let k = linear(tp, kv_in, &names.wk, &format!("{}.bk", names.bias_prefix));
    let v = linear(tp, kv_in, &names.wv, &format!("{}.bv", names.bias_prefix));
    let hd = cfg.head_dim();
    let scale = 1.0 / (hd as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let qh = tp.tape.slice_cols(q, h * hd, hd);
        let kh = tp.tape.slice_cols(k, h * hd, hd);
        let vh = tp.tape.slice_cols(v, h * hd, hd);
        let scores = tp.tape.matmul_t(qh, kh);
        let scores = tp.tape.scale_const(scores, scale);
        let weights = tp.tape.softmax_masked(scores, allowed.to_vec());
        heads.push(tp.tape.matmul(weights, vh));
    }
    let merged = tp.tape.concat_cols(&heads);
    linear(tp, merged, &names.wo, &format!("{}.bo", names.bias_prefix))
}

pub fn ffn(tp: &mut TapeParams, x: Var, prefix: &str) -> Var {
    let h = linear(tp, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"));
    let h = tp.tape.gelu(h);
    linear(tp, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

/// One pre-norm self-attention + FFN residual layer, as used by the
/// encoder main stream and the context stream.
pub fn self_attn_layer(
    tp: &mut TapeParams,
    x: Var,
    prefix: &str,
    cfg: &ModelConfig,
    allowed: &[bool],
) -> Var {
    let normed = layer_norm_p(tp, x, &format!("{prefix}.ln1"));
    let names = AttnNames::unified(&format!("{prefix}.attn"));
    let att = attention(tp, normed, normed, &names, cfg, allowed);
    let x = tp.tape.add(x, att);
    let normed = layer_norm_p(tp, x, &format!("{prefix}.ln2"));
    let f = ffn(tp, normed, &format!("{prefix}.ffn"));
    tp.tape.add(x, f)
}
