//! Adam with inverse-square-root warmup and global-norm gradient clipping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::checkpoint::Checkpoint;
use crate::model::params::Params;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Warmup steps for the inverse-sqrt schedule; 0 means constant lr.
    pub warmup: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.98, eps: 1e-9, warmup: 400, clip: 1.0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be finite and >= 0", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("adam {name} {b} outside [0,1)")));
            }
        }
        if self.eps <= 0.0 {
            return Err(Error::Config(format!("adam eps {} must be positive", self.eps)));
        }
        if self.clip < 0.0 {
            return Err(Error::Config(format!("clip {} must be >= 0", self.clip)));
        }
        Ok(())
    }
}

/// Optimizer state. Moments exist for every parameter, so parameters with
/// no gradient this step still decay deterministically.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &Params) -> Result<Adam> {
        cfg.validate()?;
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for (name, t) in params.iter() {
            m.insert(name.to_string(), Tensor::zeros(t.shape()));
            v.insert(name.to_string(), Tensor::zeros(t.shape()));
        }
        Ok(Adam { cfg, step: 0, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Learning rate at 1-based step `s`: lr * min(s/w, sqrt(w/s)).
    pub fn lr_at(&self, s: u64) -> f64 {
        let s = s.max(1) as f64;
        if self.cfg.warmup == 0 {
            return self.cfg.lr;
        }
        let w = self.cfg.warmup as f64;
        self.cfg.lr * (s / w).min((w / s).sqrt())
    }

    /// One update over all parameters. Returns the pre-clip global
    /// gradient norm.
    pub fn apply(&mut self, params: &mut Params, grads: &BTreeMap<String, Tensor>) -> Result<f64> {
        let mut sq = 0.0;
        for (name, g) in grads {
            if !self.m.contains_key(name.as_str()) {
                return Err(Error::Config(format!("gradient for unknown parameter {name:?}")));
            }
            for &x in g.data() {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {name}")));
                }
                sq += x * x;
            }
        }
        let norm = sq.sqrt();
        let scale = if self.cfg.clip > 0.0 && norm > self.cfg.clip {
            self.cfg.clip / norm
        } else {
            1.0
        };

        self.step += 1;
        let t = self.step;
        let lr = self.lr_at(t);
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        let names: Vec<String> = self.m.keys().cloned().collect();
        for name in names {
            let m = self.m.get_mut(&name).expect("moment exists");
            let v = self.v.get_mut(&name).expect("moment exists");
            let g = grads.get(&name);
            let p = params.get_mut(&name);
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = g.map_or(0.0, |t| t.data()[i]) * scale;
                md[i] = b1 * md[i] + (1.0 - b1) * gi;
                vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi;
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                pd[i] -= lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
        Ok(norm)
    }

    /// Stores moments under `adam.m.` / `adam.v.` prefixes.
    pub fn save_into(&self, ck: &mut Checkpoint) {
        for (name, t) in &self.m {
            ck.tensors.insert(format!("adam.m.{name}"), t.clone());
        }
        for (name, t) in &self.v {
            ck.tensors.insert(format!("adam.v.{name}"), t.clone());
        }
    }

    /// Rebuilds optimizer state for a resumed run. A checkpoint without
    /// moments resumes only from step 0.
    pub fn load_from(
        ck: &Checkpoint,
        cfg: AdamConfig,
        params: &Params,
        step: u64,
    ) -> Result<Adam> {
        let mut adam = Adam::new(cfg, params)?;
        adam.step = step;
        let has_any = ck.tensors.keys().any(|k| k.starts_with("adam.m."));
        if !has_any {
            if step > 0 {
                return Err(Error::Checkpoint(format!(
                    "checkpoint at step {step} lacks optimizer state"
                )));
            }
            return Ok(adam);
        }
        for (name, slot) in adam.m.iter_mut() {
            let key = format!("adam.m.{name}");
            let t = ck
                .tensors
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing {key:?}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!("bad shape for {key:?}")));
            }
            *slot = t.clone();
        }
        for (name, slot) in adam.v.iter_mut() {
            let key = format!("adam.v.{name}");
            let t = ck
                .tensors
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing {key:?}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!("bad shape for {key:?}")));
            }
            *slot = t.clone();
        }
        Ok(adam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;

    fn tiny_params() -> Params {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), Tensor::from_vec(&[2], vec![1.0, 2.0]));
        map.insert("b".to_string(), Tensor::from_vec(&[1], vec![-1.0]));
        Params::from_map(map)
    }

    #[test]
    fn warmup_schedule_peaks_at_warmup() {
        let adam = Adam::new(AdamConfig::default(), &tiny_params()).unwrap();
        assert!(adam.lr_at(1) < adam.lr_at(400));
        assert!((adam.lr_at(400) - 3e-4).abs() < 1e-12);
        assert!(adam.lr_at(1600) < adam.lr_at(400));
        assert!((adam.lr_at(1600) - 3e-4 * 0.5).abs() < 1e-12);
        let flat = Adam::new(AdamConfig { warmup: 0, ..AdamConfig::default() }, &tiny_params())
            .unwrap();
        assert_eq!(flat.lr_at(1), flat.lr_at(1000));
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let cfg = AdamConfig { lr: 0.1, warmup: 0, clip: 0.0, ..AdamConfig::default() };
        let mut params = tiny_params();
        let mut adam = Adam::new(cfg, &params).unwrap();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Tensor::from_vec(&[2], vec![0.5, -0.25]));
        adam.apply(&mut params, &grads).unwrap();
        // First step: mhat = g, vhat = g^2, update = lr * g/(|g|+eps).
        let a = params.get("a").data();
        assert!((a[0] - (1.0 - 0.1)).abs() < 1e-6, "{a:?}");
        assert!((a[1] - (2.0 + 0.1)).abs() < 1e-6, "{a:?}");
        // No gradient for b: moments stay zero, value unchanged.
        assert_eq!(params.get("b").data(), &[-1.0]);
    }

    #[test]
    fn zero_lr_freezes_parameters() {
        let cfg = AdamConfig { lr: 0.0, ..AdamConfig::default() };
        let mut params = tiny_params();
        let before = params.get("a").data().to_vec();
        let mut adam = Adam::new(cfg, &params).unwrap();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Tensor::from_vec(&[2], vec![3.0, -4.0]));
        for _ in 0..5 {
            adam.apply(&mut params, &grads).unwrap();
        }
        assert_eq!(params.get("a").data(), &before[..]);
    }

    #[test]
    fn clipping_rescales_large_gradients() {
        let cfg = AdamConfig { lr: 1.0, warmup: 0, clip: 1.0, ..AdamConfig::default() };
        let mut pa = tiny_params();
        let mut pb = tiny_params();
        let mut adam_a = Adam::new(cfg, &pa).unwrap();
        let mut adam_b = Adam::new(cfg, &pb).unwrap();
        let mut big = BTreeMap::new();
        big.insert("a".to_string(), Tensor::from_vec(&[2], vec![30.0, 40.0]));
        let norm = adam_a.apply(&mut pa, &big).unwrap();
        assert!((norm - 50.0).abs() < 1e-12);
        // Scaled-down copy of the same direction gives the same update.
        let mut small = BTreeMap::new();
        small.insert("a".to_string(), Tensor::from_vec(&[2], vec![30.0 / 50.0, 40.0 / 50.0]));
        adam_b.apply(&mut pb, &small).unwrap();
        assert_eq!(pa.get("a").data(), pb.get("a").data());
    }

    #[test]
    fn state_round_trips_through_checkpoint() {
        let cfg = AdamConfig::default();
        let mut params = tiny_params();
        let mut adam = Adam::new(cfg, &params).unwrap();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Tensor::from_vec(&[2], vec![0.5, -0.25]));
        adam.apply(&mut params, &grads).unwrap();

        let mut ck = Checkpoint::default();
        ck.set_model_config(&ModelConfig::default());
        adam.save_into(&mut ck);
        let back = Adam::load_from(&ck, cfg, &params, 1).unwrap();
        assert_eq!(back.step_count(), 1);
        assert_eq!(back.m, adam.m);
        assert_eq!(back.v, adam.v);

        let empty = Checkpoint::default();
        assert!(Adam::load_from(&empty, cfg, &params, 3).is_err());
        assert!(Adam::load_from(&empty, cfg, &params, 0).is_ok());
    }

    #[test]
    fn non_finite_gradients_are_rejected() {
        let mut params = tiny_params();
        let mut adam = Adam::new(AdamConfig::default(), &params).unwrap();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Tensor::from_vec(&[2], vec![f64::NAN, 0.0]));
        assert!(matches!(adam.apply(&mut params, &grads), Err(Error::NonFinite(_))));
    }
}
