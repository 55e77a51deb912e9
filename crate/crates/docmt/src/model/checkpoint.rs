//! Checkpoint file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "DMTCKPT1"
//! version u32      format version, currently 1
//! meta    u64 len, then UTF-8 "key = value" lines (model config,
//!                  training metadata)
//! count   u64      number of tensor blobs
//! blob*   u64 name len, name bytes, u32 ndim, u64 dims…, f64 data…
//! ```
//!
//! Blobs are written in sorted name order, so equal state produces equal
//! bytes. Optimizer state shares the file under the `adam.m.`/`adam.v.`
//! prefixes; predictor weights live under `predictor.`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::params::{param_specs, Params};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"DMTCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn model_config(&self) -> Result<ModelConfig> {
        ModelConfig::from_kv(&self.meta)
    }

    pub fn set_model_config(&mut self, cfg: &ModelConfig) {
        for (k, v) in cfg.to_kv() {
            self.meta.insert(k, v);
        }
    }

    /// Extracts the model parameters, validating names and shapes against
    /// the config's schema. Non-parameter blobs (optimizer moments) are
    /// ignored here.
    pub fn to_params(&self, cfg: &ModelConfig) -> Result<Params> {
        let mut map = BTreeMap::new();
        for (name, shape, _) in param_specs(cfg) {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name:?} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            map.insert(name, t.clone());
        }
        Ok(Params::from_map(map))
    }

    pub fn insert_params(&mut self, params: &Params) {
        for (name, t) in params.iter() {
            self.tensors.insert(name.to_string(), t.clone());
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let mut meta_text = String::new();
        for (k, v) in &self.meta {
            if k.contains('\n') || v.contains('\n') {
                return Err(Error::Checkpoint(format!("newline in metadata key {k:?}")));
            }
            meta_text.push_str(k);
            meta_text.push_str(" = ");
            meta_text.push_str(v);
            meta_text.push('\n');
        }
        buf.extend_from_slice(&(meta_text.len() as u64).to_le_bytes());
        buf.extend_from_slice(meta_text.as_bytes());
        buf.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader { bytes: &bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let meta_len = r.u64()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Checkpoint("metadata is not UTF-8".into()))?;
        let mut meta = BTreeMap::new();
        for line in meta_text.lines() {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Checkpoint(format!("malformed metadata line {line:?}")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u64()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u64()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            if ndim > 4 {
                return Err(Error::Checkpoint(format!("tensor {name:?} has rank {ndim}")));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(r.f64()?);
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {name:?} has non-finite values")));
            }
            tensors.insert(name, Tensor::from_vec(&shape, data));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Checkpoint { meta, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity_and_deterministic() {
        let cfg = ModelConfig::default();
        let params = Params::init(&cfg, 17);
        let mut ck = Checkpoint::default();
        ck.set_model_config(&cfg);
        ck.meta.insert("train.step".into(), "12".into());
        ck.insert_params(&params);

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        ck.write(&p1).unwrap();
        ck.write(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let back = Checkpoint::read(&p1).unwrap();
        assert_eq!(back, ck);
        let params2 = back.to_params(&cfg).unwrap();
        for (name, t) in params.iter() {
            assert_eq!(params2.get(name).data(), t.data(), "{name}");
        }
        assert_eq!(back.model_config().unwrap(), cfg);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPT").unwrap();
        assert!(matches!(Checkpoint::read(&path), Err(Error::Checkpoint(_))));

        // truncated file
        let cfg = ModelConfig::default();
        let mut ck = Checkpoint::default();
        ck.set_model_config(&cfg);
        ck.insert_params(&Params::init(&cfg, 1));
        ck.write(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Checkpoint::read(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn missing_or_misshaped_params_are_rejected() {
        let cfg = ModelConfig::default();
        let params = Params::init(&cfg, 3);
        let mut ck = Checkpoint::default();
        ck.set_model_config(&cfg);
        ck.insert_params(&params);
        ck.tensors.remove("embed.tok");
        assert!(matches!(ck.to_params(&cfg), Err(Error::Checkpoint(_))));
        ck.tensors.insert("embed.tok".into(), Tensor::zeros(&[2, 2]));
        assert!(matches!(ck.to_params(&cfg), Err(Error::Checkpoint(_))));
    }
}
