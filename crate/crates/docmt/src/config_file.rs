//! Flat key-value configuration.
//!
//! Files hold `key = value` lines; `#` starts a comment line. Values
//! resolve in layers, defaults then file then environment then flags,
//! with later layers winning. Every key must exist in the defaults, so
//! typos fail loudly no matter where they come from.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Environment override prefix: `DOCMT_TRAIN_LR` sets key `train.lr`.
pub const ENV_PREFIX: &str = "DOCMT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Default,
    File,
    Env,
    Flag,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Env => "env",
            Source::Flag => "flag",
        }
    }
}

/// Environment variable spelling of a config key.
pub fn env_key(prefix: &str, key: &str) -> String {
    let mut out = prefix.to_string();
    for ch in key.chars() {
        out.push(match ch {
            '.' | '-' => '_',
            c => c.to_ascii_uppercase(),
        });
    }
    out
}

pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse {
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse { line: i + 1, msg: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    parse_kv(&std::fs::read_to_string(path)?)
}

/// A fully resolved configuration with per-key provenance.
#[derive(Debug, Clone, Default)]
pub struct Resolved {
    entries: BTreeMap<String, (String, Source)>,
}

impl Resolved {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Resolved {
        let mut entries = BTreeMap::new();
        for (k, v) in defaults {
            entries.insert(k.to_string(), (v.to_string(), Source::Default));
        }
        Resolved { entries }
    }

    pub fn known(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<()> {
        match self.entries.get_mut(key) {
            Some(slot) => {
                *slot = (value.to_string(), source);
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (k, v) in read_kv(path)? {
            self.set(&k, &v, Source::File)
                .map_err(|_| Error::Config(format!("unknown config key {k:?} in {path:?}")))?;
        }
        Ok(())
    }

    /// Applies `PREFIX_*` environment variables. Unrecognized variables
    /// under the prefix are rejected rather than silently ignored.
    pub fn apply_env(&mut self, prefix: &str) -> Result<()> {
        let mut by_env: BTreeMap<String, String> = BTreeMap::new();
        for key in self.entries.keys() {
            let env = env_key(prefix, key);
            if let Some(clash) = by_env.insert(env.clone(), key.clone()) {
                return Err(Error::Config(format!(
                    "config keys {clash:?} and {key:?} share environment name {env}"
                )));
            }
        }
        let mut vars: Vec<(String, String)> = std::env::vars()
            .filter(|(name, _)| name.starts_with(prefix))
            .collect();
        vars.sort();
        for (name, value) in vars {
            let key = by_env
                .get(&name)
                .ok_or_else(|| Error::Config(format!("unknown environment override {name}")))?
                .clone();
            self.set(&key, &value, Source::Env)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))
    }

    pub fn source(&self, key: &str) -> Option<Source> {
        self.entries.get(key).map(|(_, s)| *s)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key {key:?}: {raw:?} is not a number")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key {key:?}: {raw:?} is not a whole number")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key {key:?}: {raw:?} is not a whole number")))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key)? {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(Error::Config(format!("key {key:?}: {other:?} is not a boolean"))),
        }
    }

    /// `key = value` lines for every resolved key, sorted, parseable by
    /// `parse_kv`. Used for the startup config echo.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, (v, _)) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Source)> {
        self.entries.iter().map(|(k, (v, s))| (k.as_str(), v.as_str(), *s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Resolved {
        Resolved::from_defaults(&[("train.lr", "0.0003"), ("train.steps", "100"), ("run.quiet", "false")])
    }

    #[test]
    fn layers_resolve_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\ntrain.lr = 0.001\n\ntrain.steps=7\n").unwrap();
        let mut r = base();
        r.apply_file(&path).unwrap();
        assert_eq!(r.get_f64("train.lr").unwrap(), 0.001);
        assert_eq!(r.get_usize("train.steps").unwrap(), 7);
        assert_eq!(r.source("train.lr"), Some(Source::File));
        assert_eq!(r.source("run.quiet"), Some(Source::Default));

        r.set("train.lr", "0.01", Source::Flag).unwrap();
        assert_eq!(r.get_f64("train.lr").unwrap(), 0.01);
        assert_eq!(r.source("train.lr"), Some(Source::Flag));
    }

    #[test]
    fn env_overrides_apply_with_prefix() {
        let mut r = base();
        std::env::set_var("DOCMTCFGTEST_TRAIN_LR", "0.5");
        r.apply_env("DOCMTCFGTEST_").unwrap();
        std::env::remove_var("DOCMTCFGTEST_TRAIN_LR");
        assert_eq!(r.get_f64("train.lr").unwrap(), 0.5);
        assert_eq!(r.source("train.lr"), Some(Source::Env));

        std::env::set_var("DOCMTCFGBAD_TRAIN_TYPO", "1");
        let err = base().apply_env("DOCMTCFGBAD_");
        std::env::remove_var("DOCMTCFGBAD_TRAIN_TYPO");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn unknown_and_malformed_inputs_are_rejected() {
        let mut r = base();
        assert!(r.set("train.typo", "1", Source::Flag).is_err());
        assert!(matches!(
            parse_kv("a = 1\nnot a pair\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_kv(" = 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(r.get_f64("run.quiet").is_err());
        assert!(r.get_bool("train.lr").is_err());
    }

    #[test]
    fn echo_round_trips_and_is_sorted() {
        let r = base();
        let echo = r.echo();
        let parsed = parse_kv(&echo).unwrap();
        assert_eq!(parsed.len(), 3);
        let keys: Vec<&str> = parsed.iter().map(|(k, _)| k.as_str()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for (k, v) in &parsed {
            assert_eq!(r.get(k).unwrap(), v);
        }
    }

    #[test]
    fn env_key_spelling() {
        assert_eq!(env_key(ENV_PREFIX, "train.mask_rate"), "DOCMT_TRAIN_MASK_RATE");
        assert_eq!(env_key(ENV_PREFIX, "no-div"), "DOCMT_NO_DIV");
    }
}
