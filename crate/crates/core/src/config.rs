//! Run configuration files (TOML).
//!
//! Precedence, highest first: command-line flags, `WPMIXER_*` environment
//! variables, the config file, built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Label used in metrics output; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub split: SplitSpec,
    /// Let validation/test inputs start in the preceding part.
    #[serde(default = "yes")]
    pub back_reach: bool,
}

fn yes() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn dataset_name(&self) -> String {
        self.data.name.clone().unwrap_or_else(|| {
            self.data.path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        })
    }

    /// Applies `WPMIXER_SEED`, `WPMIXER_OUT`, `WPMIXER_DATA`,
    /// `WPMIXER_EPOCHS` and `WPMIXER_STRICT_SPLITS` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(format!("{key}={v:?} is not valid")))
        }
        if let Some(v) = lookup("WPMIXER_SEED") {
            self.seed = parse("WPMIXER_SEED", &v)?;
        }
        if let Some(v) = lookup("WPMIXER_OUT") {
            self.out_dir = v.into();
        }
        if let Some(v) = lookup("WPMIXER_DATA") {
            self.data.path = v.into();
        }
        if let Some(v) = lookup("WPMIXER_EPOCHS") {
            self.train.epochs = parse("WPMIXER_EPOCHS", &v)?;
        }
        if let Some(v) = lookup("WPMIXER_STRICT_SPLITS") {
            let strict: bool = parse("WPMIXER_STRICT_SPLITS", &v)?;
            self.data.back_reach = !strict;
        }
        Ok(())
    }
}

/// Field-by-field differences between two model configurations, as
/// `path: left != right` strings.
pub fn diff_model_configs(left: &ModelConfig, right: &ModelConfig) -> Vec<String> {
    let l = toml::Value::try_from(left).expect("serializable");
    let r = toml::Value::try_from(right).expect("serializable");
    let mut out = Vec::new();
    diff_values("model", &l, &r, &mut out);
    out
}

fn diff_values(path: &str, l: &toml::Value, r: &toml::Value, out: &mut Vec<String>) {
    match (l, r) {
        (toml::Value::Table(a), toml::Value::Table(b)) => {
            let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
            for k in keys {
                let p = format!("{path}.{k}");
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => diff_values(&p, x, y, out),
                    (x, y) => out.push(format!("{p}: {x:?} != {y:?}")),
                }
            }
        }
        _ if l != r => out.push(format!("{path}: {l} != {r}")),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
seed = 42
out_dir = "runs/etth1"

[data]
path = "data/ETTh1.csv"
split = { kind = "ett-hour" }

[model]
channels = 7
seq_len = 512
pred_len = 96
wavelet = "db2"
level = 2
patch_len = 16
stride = 8
d_model = 256
tfactor = 5
dfactor = 8
mixer_dropout = 0.4
embed_dropout = 0.1

[train]
epochs = 30
batch_size = 256
lr = 0.00024
"#;

    #[test]
    fn parse_serialize_parse_is_a_fixpoint() {
        let a = RunConfig::from_toml(SAMPLE).unwrap();
        let text = a.to_toml();
        let b = RunConfig::from_toml(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(text, b.to_toml());
        assert!(a.data.back_reach);
        assert_eq!(a.dataset_name(), "ETTh1");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("tfactor = 5", "tfactor = 5\ntfactr = 5");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("seed = 42", "seed = 42\nsed = 1");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn unknown_wavelet_is_rejected() {
        let bad = SAMPLE.replace("\"db2\"", "\"db7\"");
        let e = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("db7"), "{e}");
    }

    #[test]
    fn env_overrides() {
        let mut c = RunConfig::from_toml(SAMPLE).unwrap();
        c.apply_env(|k| match k {
            "WPMIXER_SEED" => Some("7".into()),
            "WPMIXER_STRICT_SPLITS" => Some("true".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.seed, 7);
        assert!(!c.data.back_reach);
        assert!(c.apply_env(|k| (k == "WPMIXER_SEED").then(|| "x".into())).is_err());
    }

    #[test]
    fn diff_lists_every_changed_field() {
        let a = RunConfig::from_toml(SAMPLE).unwrap().model;
        let mut b = a.clone();
        b.d_model = 128;
        b.ablation.patching = false;
        let d = diff_model_configs(&a, &b);
        assert_eq!(d.len(), 2, "{d:?}");
        assert!(d.iter().any(|s| s.starts_with("model.d_model")));
        assert!(d.iter().any(|s| s.starts_with("model.ablation.patching")));
    }
}
