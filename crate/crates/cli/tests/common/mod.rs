#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wpmixer"));
    for (k, _) in std::env::vars() {
        if k.starts_with("WPMIXER_") {
            c.env_remove(k);
        }
    }
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn wpmixer")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a two-channel sine-plus-trend CSV and a small run config using it.
/// Returns the config path.
pub fn synthetic_run(dir: &Path, epochs: usize, extra_model: &str) -> PathBuf {
    let data = dir.join("sine.csv");
    wpmixer::data::sine_trend(260, 2).write_csv(&data).unwrap();
    let cfg = dir.join("run.toml");
    let text = format!(
        r#"seed = 7
out_dir = "{out}"

[data]
path = "{data}"
split = {{ kind = "rows", train = 140, val = 60, test = 60 }}

[model]
channels = 2
seq_len = 32
pred_len = 8
wavelet = "db2"
level = 1
patch_len = 8
stride = 4
d_model = 8
tfactor = 2
dfactor = 2
mixer_dropout = 0.1
embed_dropout = 0.1
{extra_model}
[train]
epochs = {epochs}
batch_size = 16
lr = 0.003
"#,
        out = dir.join("out").display(),
        data = data.display(),
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}
