//! Parameter registry: every trainable tensor, keyed by a stable name.
//!
//! Names are hierarchical (`enc.l0.attn.wq`, `alpha.o1.l0`, `predictor.w`)
//! and the registry is a sorted map, so iteration order, serialization
//! order and optimizer traversal order are all deterministic.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::model::config::{ModelConfig, Variant};
use crate::rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// How a parameter tensor is filled at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal with std 2/(fan_in+fan_out) squared-rooted.
    Xavier,
    /// Normal with the given std.
    Normal(f64),
}

/// Full parameter specification for a config: (name, shape, init).
/// Doubles as the schema that checkpoints are validated against.
pub fn param_specs(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.d_model;
    let dff = cfg.d_ff;
    let v = cfg.vocab_size;
    let mut specs: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let push = |specs: &mut Vec<(String, Vec<usize>, Init)>, name: String, shape: &[usize], init: Init| {
        specs.push((name, shape.to_vec(), init));
    };

    push(&mut specs, "embed.tok".into(), &[v, d], Init::Normal(1.0 / (d as f64).sqrt()));
    push(&mut specs, "embed.seg".into(), &[4, d], Init::Normal(0.02));

    // Residual-path output matrices start at zero so every block is the
    // identity at init; that keeps all decoder exit depths equivalent until
    // finetuning moves them apart.
    let attn = |specs: &mut Vec<(String, Vec<usize>, Init)>, p: &str, zero_out: bool| {
        for w in ["wq", "wk", "wv"] {
            specs.push((format!("{p}.{w}"), vec![d, d], Init::Xavier));
        }
        let out_init = if zero_out { Init::Zeros } else { Init::Xavier };
        specs.push((format!("{p}.wo"), vec![d, d], out_init));
        for b in ["bq", "bk", "bv", "bo"] {
            specs.push((format!("{p}.{b}"), vec![d], Init::Zeros));
        }
    };
    let ln = |specs: &mut Vec<(String, Vec<usize>, Init)>, p: &str| {
        specs.push((format!("{p}.gain"), vec![d], Init::Ones));
        specs.push((format!("{p}.bias"), vec![d], Init::Zeros));
    };
    let ffn = |specs: &mut Vec<(String, Vec<usize>, Init)>, p: &str| {
        specs.push((format!("{p}.w1"), vec![d, dff], Init::Xavier));
        specs.push((format!("{p}.b1"), vec![dff], Init::Zeros));
        specs.push((format!("{p}.w2"), vec![dff, d], Init::Zeros));
        specs.push((format!("{p}.b2"), vec![d], Init::Zeros));
    };

    let enc_layers = cfg.encoder_layers();
    for l in 0..enc_layers {
        let p = format!("enc.l{l}");
        ln(&mut specs, &format!("{p}.ln1"));
        attn(&mut specs, &format!("{p}.attn"), true);
        ln(&mut specs, &format!("{p}.ln2"));
        ffn(&mut specs, &format!("{p}.ffn"));
    }
    ln(&mut specs, "enc.final_ln");

    if cfg.variant == Variant::ContextUnit {
        // Parallel context stream plus per-layer gated cross-attention.
        for l in 0..enc_layers {
            let p = format!("cxt.l{l}");
            ln(&mut specs, &format!("{p}.ln1"));
            attn(&mut specs, &format!("{p}.attn"), true);
            ln(&mut specs, &format!("{p}.ln2"));
            ffn(&mut specs, &(p.clone() + ".ffn"));
        }
        for l in 0..enc_layers {
            let p = format!("enc.l{l}.ca");
            ln(&mut specs, &format!("{p}.lnq"));
            ln(&mut specs, &format!("{p}.lnkv"));
            for b in ["bq", "bk", "bv", "bo"] {
                push(&mut specs, format!("{p}.{b}"), &[d], Init::Zeros);
            }
            // The gate alpha starts at zero, so the cross-attention
            // matrices must not: a zero product would freeze both.
            if l + 1 == enc_layers {
                for o in 0..cfg.variant.n_options() {
                    for w in ["wq", "wk", "wv", "wo"] {
                        push(&mut specs, format!("{p}.o{o}.{w}"), &[d, d], Init::Xavier);
                    }
                }
            } else {
                for w in ["wq", "wk", "wv", "wo"] {
                    push(&mut specs, format!("{p}.{w}"), &[d, d], Init::Xavier);
                }
            }
        }
        for o in 0..cfg.variant.n_options() {
            for l in 0..enc_layers {
                push(&mut specs, format!("alpha.o{o}.l{l}"), &[1], Init::Zeros);
            }
        }
    }

    for l in 0..cfg.dec_layers {
        let p = format!("dec.l{l}");
        ln(&mut specs, &format!("{p}.ln1"));
        attn(&mut specs, &format!("{p}.attn"), true);
        ln(&mut specs, &format!("{p}.ln2"));
        attn(&mut specs, &format!("{p}.xattn"), true);
        ln(&mut specs, &format!("{p}.ln3"));
        ffn(&mut specs, &(p.clone() + ".ffn"));
    }
    ln(&mut specs, "dec.final_ln");

    push(&mut specs, "out_proj.w".into(), &[d, v], Init::Xavier);
    push(&mut specs, "out_proj.b".into(), &[v], Init::Zeros);
    push(&mut specs, "mask_head.w".into(), &[d, v], Init::Xavier);
    push(&mut specs, "mask_head.b".into(), &[v], Init::Zeros);

    push(&mut specs, "predictor.w".into(), &[d, cfg.variant.n_options()], Init::Xavier);
    push(&mut specs, "predictor.b".into(), &[cfg.variant.n_options()], Init::Zeros);

    specs
}

/// All trainable tensors of one model.
#[derive(Clone)]
pub struct Params {
    map: BTreeMap<String, Rc<Tensor>>,
}

impl Params {
    /// Deterministic initialization: each tensor is drawn from its own
    /// named random stream, so values depend only on (seed, name, shape).
    pub fn init(cfg: &ModelConfig, seed: u64) -> Params {
        let mut map = BTreeMap::new();
        for (name, shape, init) in param_specs(cfg) {
            let t = init_tensor(&shape, init, seed, &name);
            map.insert(name, Rc::new(t));
        }
        Params { map }
    }

    pub fn from_map(map: BTreeMap<String, Tensor>) -> Params {
        Params { map: map.into_iter().map(|(k, v)| (k, Rc::new(v))).collect() }
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn get_rc(&self, name: &str) -> Rc<Tensor> {
        Rc::clone(
            self.map
                .get(name)
                .unwrap_or_else(|| panic!("unknown parameter {name:?}")),
        )
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Mutable access for the optimizer. Copies lazily if a tape still
    /// shares the tensor, which never happens between steps.
    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        Rc::make_mut(
            self.map
                .get_mut(name)
                .unwrap_or_else(|| panic!("unknown parameter {name:?}")),
        )
    }

    pub fn set(&mut self, name: &str, value: Tensor) {
        self.map.insert(name.to_string(), Rc::new(value));
    }

    /// Sorted-by-name iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_ref()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|k| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn n_scalars(&self) -> usize {
        self.map.values().map(|t| t.len()).sum()
    }
}

fn init_tensor(shape: &[usize], init: Init, seed: u64, name: &str) -> Tensor {
    let mut t = Tensor::zeros(shape);
    match init {
        Init::Zeros => {}
        Init::Ones => t.data_mut().fill(1.0),
        Init::Xavier => {
            let (fan_in, fan_out) = if shape.len() == 2 {
                (shape[0], shape[1])
            } else {
                (t.len(), t.len())
            };
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            fill_normal(&mut t, std, seed, name);
        }
        Init::Normal(std) => fill_normal(&mut t, std, seed, name),
    }
    t
}

fn fill_normal(t: &mut Tensor, std: f64, seed: u64, name: &str) {
    let mut rng = rng::stream(seed, &format!("init.{name}"));
    for v in t.data_mut() {
        *v = rng::normal(&mut rng) * std;
    }
}

/// One forward pass's view of the registry: parameters become tape leaves
/// on first use and are reused after, so a weight touched twice in one
/// graph accumulates both gradient contributions on a single node.
pub struct TapeParams<'a> {
    pub tape: Tape,
    params: &'a Params,
    bound: BTreeMap<String, Var>,
}

impl<'a> TapeParams<'a> {
    pub fn new(params: &'a Params) -> TapeParams<'a> {
        TapeParams { tape: Tape::new(), params, bound: BTreeMap::new() }
    }

    pub fn var(&mut self, name: &str) -> Var {
        if let Some(v) = self.bound.get(name) {
            return *v;
        }
        let v = self.tape.leaf_rc(self.params.get_rc(name));
        self.bound.insert(name.to_string(), v);
        v
    }

    pub fn params(&self) -> &Params {
        self.params
    }

    /// Which parameters this pass touched, with their leaf nodes.
    pub fn bound(&self) -> impl Iterator<Item = (&str, Var)> {
        self.bound.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
