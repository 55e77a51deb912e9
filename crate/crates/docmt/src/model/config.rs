//! Model hyperparameters and the two architecture variants.

use crate::error::{Error, Result};

/// Which document-translation architecture a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Source and context are encoded in parallel streams and fused with
    /// learned zero-initialized gates. Options: previous sentence, next
    /// sentence, or no context.
    ContextUnit,
    /// Context sentences are concatenated around the source (and the
    /// previous target around the target). Options differ in which sides
    /// are present and in how many decoder layers run.
    Concatenate,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::ContextUnit => "context-unit",
            Variant::Concatenate => "concatenate",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "context-unit" => Ok(Variant::ContextUnit),
            "concatenate" => Ok(Variant::Concatenate),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}, expected \"context-unit\" or \"concatenate\""
            ))),
        }
    }

    /// Number of context options the predictor chooses between.
    pub fn n_options(&self) -> usize {
        match self {
            Variant::ContextUnit => 3,
            Variant::Concatenate => 4,
        }
    }

    /// For the context-unit variant, the option that uses no context.
    /// For concatenate, the option with no context on either side.
    pub fn empty_option(&self) -> usize {
        match self {
            Variant::ContextUnit => 2,
            Variant::Concatenate => 0,
        }
    }

    /// Human-readable option names, in option-index order.
    pub fn option_names(&self) -> &'static [&'static str] {
        match self {
            Variant::ContextUnit => &["pre", "pos", "empty"],
            Variant::Concatenate => &[
                "non|src|non",
                "pre|src|non",
                "non|src|pos",
                "pre|src|pos",
            ],
        }
    }
}

/// Hyperparameters shared by both variants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Encoder layers in the baseline sentence model. The concatenate
    /// variant adds one extra encoder layer on top of this.
    pub enc_layers: usize,
    /// Decoder layers in the baseline sentence model. Concatenate options
    /// run a shallower prefix of this stack.
    pub dec_layers: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::ContextUnit,
            vocab_size: 64,
            d_model: 32,
            n_heads: 4,
            d_ff: 64,
            enc_layers: 2,
            dec_layers: 2,
            max_len: 64,
            dropout: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return Err(Error::Config("need at least one encoder and decoder layer".into()));
        }
        if self.variant == Variant::Concatenate {
            let max_skip = *self.depth_reduction().iter().max().unwrap();
            if self.dec_layers <= max_skip {
                return Err(Error::Config(format!(
                    "concatenate variant needs dec_layers > {max_skip}, got {}",
                    self.dec_layers
                )));
            }
        }
        if self.vocab_size < 6 {
            return Err(Error::Config("vocab_size must cover the reserved tokens".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        Ok(())
    }

    /// Encoder layers actually instantiated for this variant.
    pub fn encoder_layers(&self) -> usize {
        match self.variant {
            Variant::ContextUnit => self.enc_layers,
            Variant::Concatenate => self.enc_layers + 1,
        }
    }

    /// How many decoder layers each option skips, indexed by option.
    /// Richer context earns deeper decoding; the full-context option
    /// runs the whole stack.
    pub fn depth_reduction(&self) -> Vec<usize> {
        match self.variant {
            Variant::ContextUnit => vec![0; 3],
            Variant::Concatenate => vec![2, 1, 1, 0],
        }
    }

    /// Decoder layers executed for `option`.
    pub fn decoder_depth(&self, option: usize) -> Result<usize> {
        let red = self.depth_reduction();
        if option >= red.len() {
            return Err(Error::InvalidOption { option, n_options: red.len() });
        }
        Ok(self.dec_layers - red[option])
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Flat key-value form, used by config files and checkpoint headers.
    pub fn to_kv(&self) -> std::collections::BTreeMap<String, String> {
        let mut kv = std::collections::BTreeMap::new();
        kv.insert("model.variant".into(), self.variant.as_str().into());
        kv.insert("model.vocab_size".into(), self.vocab_size.to_string());
        kv.insert("model.d_model".into(), self.d_model.to_string());
        kv.insert("model.n_heads".into(), self.n_heads.to_string());
        kv.insert("model.d_ff".into(), self.d_ff.to_string());
        kv.insert("model.enc_layers".into(), self.enc_layers.to_string());
        kv.insert("model.dec_layers".into(), self.dec_layers.to_string());
        kv.insert("model.max_len".into(), self.max_len.to_string());
        kv.insert("model.dropout".into(), format_f64(self.dropout));
        kv
    }

    /// Parses the keys written by [`ModelConfig::to_kv`]; missing keys keep
    /// their defaults, unknown values fail.
    pub fn from_kv(kv: &std::collections::BTreeMap<String, String>) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::default();
        for (key, value) in kv {
            let parse_usize = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("{key}: expected integer, got {value:?}")))
            };
            match key.as_str() {
                "model.variant" => cfg.variant = Variant::parse(value)?,
                "model.vocab_size" => cfg.vocab_size = parse_usize()?,
                "model.d_model" => cfg.d_model = parse_usize()?,
                "model.n_heads" => cfg.n_heads = parse_usize()?,
                "model.d_ff" => cfg.d_ff = parse_usize()?,
                "model.enc_layers" => cfg.enc_layers = parse_usize()?,
                "model.dec_layers" => cfg.dec_layers = parse_usize()?,
                "model.max_len" => cfg.max_len = parse_usize()?,
                "model.dropout" => {
                    cfg.dropout = value.parse::<f64>().map_err(|_| {
                        Error::Config(format!("{key}: expected number, got {value:?}"))
                    })?
                }
                _ => {} // unrelated section
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shortest decimal form that round-trips exactly.
pub fn format_f64(v: f64) -> String {
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    s
}
