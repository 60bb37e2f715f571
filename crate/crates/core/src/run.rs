//! End-to-end train and evaluate pipelines over a [`RunConfig`].

use std::fmt::Write as _;

use crate::checkpoint::Checkpoint;
use crate::config::{diff_model_configs, RunConfig};
use crate::data::{Dataset, Metrics, Part, Windows};
use crate::error::{Error, Result};
use crate::model::WPMixer;
use crate::rng::SeedStreams;
use crate::training::{self, EpochRecord, TrainReport};

pub const METRICS_HEADER: &str = "dataset,horizon,seed,split,mse,mae";

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub horizon: usize,
    pub seed: u64,
    pub split: Part,
    pub metrics: Metrics,
}

/// Renders rows with a header; floats use round-trip formatting.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ =
            writeln!(s, "{},{},{},{},{:?},{:?}", r.dataset, r.horizon, r.seed, r.split, r.metrics.mse, r.metrics.mae);
    }
    s
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let ds =
        Dataset::load(&cfg.data.path, &cfg.data.split, cfg.model.seq_len, cfg.model.pred_len, cfg.data.back_reach)?;
    if ds.table.channels() != cfg.model.channels {
        return Err(Error::config(format!(
            "{} has {} value columns, model.channels = {}",
            cfg.data.path.display(),
            ds.table.channels(),
            cfg.model.channels
        )));
    }
    Ok(ds)
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    /// Validation and test metrics of the selected model.
    pub rows: Vec<MetricsRow>,
}

/// Initializes from the `init` stream, trains, and evaluates the selected
/// model on the validation and test parts.
pub fn train_run(cfg: &RunConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainRun> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let mut init = SeedStreams::new(cfg.seed).stream("init");
    let model = WPMixer::new(cfg.model.clone(), &mut init)?;
    let outcome = training::train(model, &ds.train, Some(&ds.val), &cfg.train, cfg.seed, on_epoch)?;
    let mut rows = Vec::new();
    for w in [&ds.val, &ds.test] {
        rows.push(row(cfg, w, &outcome.model)?);
    }
    Ok(TrainRun {
        checkpoint: Checkpoint { model: outcome.model, scaling: Some(ds.stats) },
        report: outcome.report,
        rows,
    })
}

fn row(cfg: &RunConfig, w: &Windows, model: &WPMixer) -> Result<MetricsRow> {
    Ok(MetricsRow {
        dataset: cfg.dataset_name(),
        horizon: cfg.model.pred_len,
        seed: cfg.seed,
        split: w.part,
        metrics: training::evaluate(model, w, cfg.train.batch_size)?,
    })
}

/// Fails with every differing field when the checkpoint was trained under a
/// different model configuration.
pub fn check_compatible(cfg: &RunConfig, ckpt: &Checkpoint) -> Result<()> {
    let diff = diff_model_configs(ckpt.model.config(), &cfg.model);
    if diff.is_empty() {
        Ok(())
    } else {
        Err(Error::ConfigMismatch(diff))
    }
}

/// Evaluates a checkpoint on one part of the configured dataset.
pub fn eval_run(cfg: &RunConfig, ckpt: &Checkpoint, part: Part) -> Result<MetricsRow> {
    check_compatible(cfg, ckpt)?;
    let ds = load_dataset(cfg)?;
    let w = match part {
        Part::Train => &ds.train,
        Part::Val => &ds.val,
        Part::Test => &ds.test,
    };
    row(cfg, w, &ckpt.model)
}
