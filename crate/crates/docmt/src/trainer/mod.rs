//! Two-stage training: sentence-level pretraining, then joint
//! document-level finetuning of model and predictor.

pub mod adam;
pub mod gradcheck;
pub mod loops;
pub mod step;

use std::collections::BTreeMap;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, linear_head_check, GradCheckReport};
pub use loops::{
    batch_for_step, build_checkpoint, finetune_document, pretrain_sentence, run_stage,
    run_training, steps_per_epoch, TrainRecord,
};
pub use step::{batch_step, StepOutcome};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::config::{format_f64, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    SentencePretrain,
    DocFinetune,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::SentencePretrain => "pretrain",
            Stage::DocFinetune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        match s {
            "pretrain" => Ok(Stage::SentencePretrain),
            "finetune" => Ok(Stage::DocFinetune),
            other => Err(Error::Config(format!("unknown stage {other:?}"))),
        }
    }
}

/// How per-option weights are produced each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// Predictor pi with Gumbel-softmax noise.
    Learned,
    /// Fixed 1/N on every option; predictor untouched.
    Uniform,
    /// All weight on one option; only that forward runs.
    OneHot(usize),
}

impl LambdaMode {
    pub fn as_str(&self) -> String {
        match self {
            LambdaMode::Learned => "learned".into(),
            LambdaMode::Uniform => "uniform".into(),
            LambdaMode::OneHot(k) => format!("onehot{k}"),
        }
    }

    pub fn parse(s: &str) -> Result<LambdaMode> {
        match s {
            "learned" => Ok(LambdaMode::Learned),
            "uniform" => Ok(LambdaMode::Uniform),
            other => match other.strip_prefix("onehot").and_then(|k| k.parse().ok()) {
                Some(k) => Ok(LambdaMode::OneHot(k)),
                None => Err(Error::Config(format!("unknown lambda mode {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stage: Stage,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub warmup: u64,
    pub clip: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub log_every: u64,
    pub ckpt_every: u64,
    pub seed: u64,
    pub weights: LossWeights,
    pub tau: f64,
    pub mask_rate: f64,
    pub no_uni: bool,
    pub no_div: bool,
    pub no_doc_tips: bool,
    pub lambda_mode: LambdaMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            stage: Stage::DocFinetune,
            lr: adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            warmup: adam.warmup,
            clip: adam.clip,
            batch_size: 16,
            max_steps: 200,
            log_every: 10,
            ckpt_every: 0,
            seed: 0,
            weights: LossWeights::default(),
            tau: 1.0,
            mask_rate: 0.15,
            no_uni: false,
            no_div: false,
            no_doc_tips: false,
            lambda_mode: LambdaMode::Learned,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam_config().validate()?;
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau {} must be positive", self.tau)));
        }
        if !(0.0..1.0).contains(&self.mask_rate) {
            return Err(Error::Config(format!("mask_rate {} outside [0,1)", self.mask_rate)));
        }
        Ok(())
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            warmup: self.warmup,
            clip: self.clip,
        }
    }

    /// Loss weights after stage and ablation flags. Pretraining zeroes all
    /// of them, the pi regularizers exist only under a learned lambda, and
    /// removing the document tips also removes the mask loss.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if self.stage == Stage::SentencePretrain {
            return LossWeights { beta1: 0.0, beta2: 0.0, beta3: 0.0 };
        }
        if self.no_div || self.lambda_mode != LambdaMode::Learned {
            w.beta1 = 0.0;
        }
        if self.no_uni || self.lambda_mode != LambdaMode::Learned {
            w.beta2 = 0.0;
        }
        if self.no_doc_tips {
            w.beta3 = 0.0;
        }
        w
    }

    /// Pretraining always trains the empty-context option alone.
    pub fn effective_lambda(&self, variant: Variant) -> LambdaMode {
        match self.stage {
            Stage::SentencePretrain => LambdaMode::OneHot(variant.empty_option()),
            Stage::DocFinetune => self.lambda_mode,
        }
    }

    pub fn effective_mask_rate(&self) -> f64 {
        let w = self.effective_weights();
        if w.beta3 == 0.0 {
            0.0
        } else {
            self.mask_rate
        }
    }

    /// `train.*` metadata recorded in checkpoints and echoed by commands.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(format!("train.{k}"), v);
        };
        put("stage", self.stage.as_str().into());
        put("lr", format_f64(self.lr));
        put("adam_beta1", format_f64(self.adam_beta1));
        put("adam_beta2", format_f64(self.adam_beta2));
        put("adam_eps", format_f64(self.adam_eps));
        put("warmup", self.warmup.to_string());
        put("clip", format_f64(self.clip));
        put("batch_size", self.batch_size.to_string());
        put("max_steps", self.max_steps.to_string());
        put("log_every", self.log_every.to_string());
        put("ckpt_every", self.ckpt_every.to_string());
        put("seed", self.seed.to_string());
        put("beta1", format_f64(self.weights.beta1));
        put("beta2", format_f64(self.weights.beta2));
        put("beta3", format_f64(self.weights.beta3));
        put("tau", format_f64(self.tau));
        put("mask_rate", format_f64(self.mask_rate));
        put("no_uni", self.no_uni.to_string());
        put("no_div", self.no_div.to_string());
        put("no_doc_tips", self.no_doc_tips.to_string());
        put("lambda", self.lambda_mode.as_str());
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_settings_follow_stage_and_flags() {
        let mut cfg = TrainConfig { stage: Stage::SentencePretrain, ..TrainConfig::default() };
        let w = cfg.effective_weights();
        assert_eq!((w.beta1, w.beta2, w.beta3), (0.0, 0.0, 0.0));
        assert_eq!(cfg.effective_lambda(Variant::ContextUnit), LambdaMode::OneHot(2));
        assert_eq!(cfg.effective_lambda(Variant::Concatenate), LambdaMode::OneHot(0));
        assert_eq!(cfg.effective_mask_rate(), 0.0);

        cfg.stage = Stage::DocFinetune;
        cfg.no_div = true;
        cfg.no_doc_tips = true;
        let w = cfg.effective_weights();
        assert_eq!(w.beta1, 0.0);
        assert!(w.beta2 > 0.0);
        assert_eq!(w.beta3, 0.0);
        assert_eq!(cfg.effective_mask_rate(), 0.0);
        assert_eq!(cfg.effective_lambda(Variant::Concatenate), LambdaMode::Learned);
    }

    #[test]
    fn lambda_mode_strings_round_trip() {
        for mode in [LambdaMode::Learned, LambdaMode::Uniform, LambdaMode::OneHot(3)] {
            assert_eq!(LambdaMode::parse(&mode.as_str()).unwrap(), mode);
        }
        assert!(LambdaMode::parse("onehot").is_err());
        assert!(LambdaMode::parse("gumbel").is_err());
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let good = TrainConfig::default();
        assert!(good.validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..good.clone() }.validate().is_err());
        assert!(TrainConfig { tau: 0.0, ..good.clone() }.validate().is_err());
        assert!(TrainConfig { mask_rate: 1.0, ..good.clone() }.validate().is_err());
        assert!(TrainConfig { lr: -1.0, ..good.clone() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..good }.validate().is_ok());
    }
}
