//! Binary model checkpoints plus a text manifest.
//!
//! Layout (little-endian): magic `WPMXCKPT`, `u32` version, `u64` length and
//! UTF-8 TOML of the model configuration, `u64` tensor count, then per
//! tensor `u32` name length, name, `u32` rank, `u64` extents, `f64` payload.
//! Batch-norm running statistics and optional data-scaling statistics are
//! stored as ordinary named tensors.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, WPMixer};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"WPMXCKPT";
const VERSION: u32 = 1;

/// A trained model and the scaling it was trained under.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: WPMixer,
    pub scaling: Option<Standardizer>,
}

impl Checkpoint {
    fn tensors(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> =
            self.model.params().iter().map(|(_, p)| (p.name.clone(), p.value.clone())).collect();
        for (site, rs) in self.model.running_stats() {
            let w = rs.mean.len();
            out.push((format!("{site}.running_mean"), Tensor::new(vec![w], rs.mean.clone()).unwrap()));
            out.push((format!("{site}.running_var"), Tensor::new(vec![w], rs.var.clone()).unwrap()));
            out.push((format!("{site}.initialized"), Tensor::scalar(if rs.initialized { 1.0 } else { 0.0 })));
        }
        if let Some(s) = &self.scaling {
            let c = s.mean.len();
            out.push(("data.mean".into(), Tensor::new(vec![c], s.mean.clone()).unwrap()));
            out.push(("data.std".into(), Tensor::new(vec![c], s.std.clone()).unwrap()));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = toml::to_string(self.model.config()).expect("serializable");
        buf.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
        buf.extend_from_slice(cfg.as_bytes());
        let tensors = self.tensors();
        buf.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
        for (name, t) in &tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    /// One line per tensor: name, shape, SHA-256 of the little-endian payload.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        for (name, t) in self.tensors() {
            let mut h = Sha256::new();
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
            let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
            s += &format!("{name}\t{:?}\t{hex}\n", t.shape());
        }
        s
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let cfg_len = read_u64(&mut r)? as usize;
        let cfg_text = String::from_utf8(take(&mut r, cfg_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("configuration is not UTF-8".into()))?;
        let config: ModelConfig =
            toml::from_str(&cfg_text).map_err(|e| Error::Checkpoint(format!("configuration: {e}")))?;
        let count = read_u64(&mut r)? as usize;
        let mut tensors = std::collections::BTreeMap::new();
        for _ in 0..count {
            let n = read_u32(&mut r)? as usize;
            let name = String::from_utf8(take(&mut r, n)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)? as usize;
            let shape = (0..rank).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let raw = take(&mut r, len * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.insert(name, Tensor::new(shape, data)?);
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.len())));
        }
        Self::assemble(config, tensors)
    }

    fn assemble(config: ModelConfig, mut tensors: std::collections::BTreeMap<String, Tensor>) -> Result<Self> {
        let mut model = WPMixer::new(config, &mut ChaCha8Rng::seed_from_u64(0))?;
        let ids: Vec<_> = model.params().iter().map(|(id, p)| (id, p.name.clone())).collect();
        for (id, name) in ids {
            let t = tensors.remove(&name).ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            model.params_mut().set_value(id, t)?;
        }
        let sites: Vec<String> = model.running_stats().keys().cloned().collect();
        for site in sites {
            let mut get = |suffix: &str| {
                tensors
                    .remove(&format!("{site}.{suffix}"))
                    .ok_or_else(|| Error::Checkpoint(format!("missing {site}.{suffix}")))
            };
            let (mean, var, init) = (get("running_mean")?, get("running_var")?, get("initialized")?);
            let rs = model.running_stats_mut().get_mut(&site).unwrap();
            if mean.len() != rs.mean.len() || var.len() != rs.var.len() {
                return Err(Error::Checkpoint(format!("running statistics of {site} have the wrong width")));
            }
            rs.mean = mean.into_data();
            rs.var = var.into_data();
            rs.initialized = init.data()[0] != 0.0;
        }
        let scaling = match (tensors.remove("data.mean"), tensors.remove("data.std")) {
            (Some(m), Some(s)) => Some(Standardizer { mean: m.into_data(), std: s.into_data() }),
            (None, None) => None,
            _ => return Err(Error::Checkpoint("incomplete data statistics".into())),
        };
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(Self { model, scaling })
    }

    /// Writes the checkpoint and its manifest (`<path>.manifest`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_file(path, &self.to_bytes())?;
        write_file(&manifest_path(path), self.manifest().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_bytes(&bytes)
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn take<'a>(r: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if r.len() < n {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (head, tail) = r.split_at(n);
    *r = tail;
    Ok(head)
}

fn read_exact(r: &mut &[u8], out: &mut [u8]) -> Result<()> {
    out.copy_from_slice(take(r, out.len())?);
    Ok(())
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r, 4)?.try_into().unwrap()))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(take(r, 8)?.try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::toy_config;

    fn sample() -> Checkpoint {
        let mut model = WPMixer::new(toy_config(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for rs in model.running_stats_mut().values_mut() {
            rs.mean.iter_mut().for_each(|m| *m = 0.25);
            rs.initialized = true;
        }
        Checkpoint { model, scaling: Some(Standardizer { mean: vec![1.0, 2.0], std: vec![0.5, 4.0] }) }
    }

    #[test]
    fn bytes_round_trip() {
        let a = sample();
        let b = Checkpoint::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(b.scaling, a.scaling);
        assert_eq!(b.model.running_stats(), a.model.running_stats());
    }

    #[test]
    fn truncation_and_bad_magic_are_detected() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn manifest_lists_every_tensor() {
        let c = sample();
        let m = c.manifest();
        assert_eq!(m.lines().count(), c.tensors().len());
        assert!(m.lines().all(|l| l.split('\t').nth(2).unwrap().len() == 64));
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        sample().save(&path).unwrap();
        assert!(manifest_path(&path).exists());
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.to_bytes(), sample().to_bytes());
    }
}
