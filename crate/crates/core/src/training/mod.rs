//! Losses, learning-rate schedule, optimizer and the epoch loop.

mod optim;

pub use optim::{clip_grad_norm, Adam};

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::baselines::Forecaster;
use crate::data::{ErrorSums, Metrics, Windows};
use crate::error::{Error, Result};
use crate::model::{Mode, WPMixer};
use crate::rng::SeedStreams;
use crate::tensor::Tensor;

/// SmoothL1 threshold.
pub const SMOOTH_L1_BETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    #[default]
    SmoothL1,
    Mse,
}

/// Mean over elements of `0.5 e^2 / beta` for `|e| < beta`, else `|e| - beta / 2`.
pub fn smooth_l1(pred: &Tensor, target: &Tensor, beta: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("smooth_l1", pred.shape(), target.shape()));
    }
    let total: f64 =
        pred.data().iter().zip(target.data()).map(|(p, t)| crate::autodiff::smooth_l1_elem(p - t, beta)).sum();
    Ok(total / pred.len() as f64)
}

pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(crate::data::metrics(pred, target)?.mse)
}

/// Learning rate for a 1-based epoch: `base * 0.9^(epoch - 3)`, held at
/// `base` for the first three epochs.
pub fn lr_at(epoch: usize, base: f64) -> f64 {
    if epoch <= 3 {
        base
    } else {
        base * 0.9f64.powi(epoch as i32 - 3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default)]
    pub loss: Loss,
    /// Optional global gradient-norm cap.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.lr)));
        }
        if let Some(c) = self.grad_clip {
            // Negated so NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(c > 0.0) {
                return Err(Error::config(format!("grad_clip {c} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    /// Mean training loss over the epoch's batches.
    pub train_loss: f64,
    pub val: Option<Metrics>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best validation MSE, else the last).
    pub best_epoch: usize,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,lr,steps,train_loss,val_mse,val_mae,seconds,seed";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let (mse, mae) =
                e.val.map_or((String::new(), String::new()), |m| (format!("{:e}", m.mse), format!("{:e}", m.mae)));
            let _ = writeln!(
                s,
                "{},{:e},{},{:e},{},{},{:.3},{}",
                e.epoch, e.lr, e.steps, e.train_loss, mse, mae, e.seconds, self.seed
            );
        }
        s
    }

    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.train_loss)
    }
}

/// Result of [`train`]: the report and the selected model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: WPMixer,
}

/// Trains `model` on shuffled mini-batches of `train`, evaluating on `val`
/// after every epoch and keeping the parameters with the lowest validation
/// MSE. Dropout masks and the shuffle order come from the `dropout` and
/// `shuffle` streams of `seed`.
pub fn train(
    mut model: WPMixer,
    train: &Windows,
    val: Option<&Windows>,
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("no training windows"));
    }
    let streams = SeedStreams::new(seed);
    let mut shuffle_rng = streams.stream("shuffle");
    let mut dropout_rng = streams.stream("dropout");
    let mut adam = Adam::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport { seed, epochs: Vec::with_capacity(cfg.epochs), best_epoch: 0 };
    let mut best: Option<(f64, WPMixer)> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let lr = lr_at(epoch, cfg.lr);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = train.batch(idx);
            let mut tape = Tape::new();
            let xv = tape.input(x);
            let fp = model.forward(&mut tape, xv, &mut Mode::Train { rng: &mut dropout_rng })?;
            let loss = match cfg.loss {
                Loss::SmoothL1 => tape.smooth_l1(fp.output, &y, SMOOTH_L1_BETA)?,
                Loss::Mse => tape.mse(fp.output, &y)?,
            };
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss: value });
            }
            let grads = tape.backward(loss)?;
            model.params_mut().zero_grad();
            grads.accumulate_into(&tape, model.params_mut());
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(model.params_mut(), c);
            }
            adam.step(model.params_mut(), lr)?;
            model.commit_bn(&fp.bn_stats);
            loss_sum += value;
            steps += 1;
        }
        let val_metrics = match val {
            Some(v) if !v.is_empty() => Some(evaluate(&model, v, cfg.batch_size)?),
            _ => None,
        };
        let record = EpochRecord {
            epoch,
            lr,
            steps,
            train_loss: loss_sum / steps as f64,
            val: val_metrics,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        match val_metrics {
            Some(m) => {
                if best.as_ref().is_none_or(|(b, _)| m.mse < *b) {
                    best = Some((m.mse, model.clone()));
                    report.best_epoch = epoch;
                }
            }
            None => report.best_epoch = epoch,
        }
        report.epochs.push(record);
    }
    let model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok(TrainOutcome { report, model })
}

/// MSE/MAE of `model`'s forecasts over all windows, in batches of `batch_size`.
///
/// Batches may run on several threads; per-batch sums are merged in batch
/// order, so the result does not depend on the thread count.
pub fn evaluate<F: Forecaster + ?Sized>(model: &F, windows: &Windows, batch_size: usize) -> Result<Metrics> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    evaluate_with_threads(model, windows, batch_size, threads)
}

pub fn evaluate_with_threads<F: Forecaster + ?Sized>(
    model: &F,
    windows: &Windows,
    batch_size: usize,
    threads: usize,
) -> Result<Metrics> {
    let idx: Vec<usize> = (0..windows.len()).collect();
    let batches: Vec<&[usize]> = idx.chunks(batch_size.max(1)).collect();
    let run = |b: &[usize]| -> Result<ErrorSums> {
        let (x, y) = windows.batch(b);
        ErrorSums::of(&model.forecast(&x)?, &y)
    };
    let threads = threads.clamp(1, batches.len().max(1));
    let per_batch: Vec<Result<ErrorSums>> = if threads == 1 {
        batches.iter().map(|b| run(b)).collect()
    } else {
        let mut slots: Vec<Option<Result<ErrorSums>>> = (0..batches.len()).map(|_| None).collect();
        std::thread::scope(|s| {
            for (t, chunk) in slots.chunks_mut(batches.len().div_ceil(threads)).enumerate() {
                let start = t * batches.len().div_ceil(threads);
                let (batches, run) = (&batches, &run);
                s.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run(batches[start + k]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("batch evaluated")).collect()
    };
    let mut total = ErrorSums::default();
    for s in per_batch {
        total.merge(&s?);
    }
    Ok(total.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_l1_examples() {
        let t = |v: f64| Tensor::scalar(v);
        assert_eq!(smooth_l1(&t(1.0), &t(1.0), 1.0).unwrap(), 0.0);
        assert_eq!(smooth_l1(&t(2.0), &t(0.0), 1.0).unwrap(), 1.5);
        assert_eq!(smooth_l1(&t(0.5), &t(0.0), 1.0).unwrap(), 0.125);
        assert!(smooth_l1(&Tensor::zeros(&[2]), &Tensor::zeros(&[3]), 1.0).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&Tensor::scalar(2.0), &Tensor::scalar(0.0)).unwrap(), 4.0);
    }

    #[test]
    fn small_errors_are_half_mse() {
        let e = Tensor::from_fn(&[50], |i| (i as f64 - 25.0) * 1e-3);
        let z = Tensor::zeros(&[50]);
        let s = smooth_l1(&e, &z, SMOOTH_L1_BETA).unwrap();
        assert!((s - 0.5 * mse_loss(&e, &z).unwrap()).abs() < 1e-18);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_at(1, 0.001), 0.001);
        assert_eq!(lr_at(3, 0.001), 0.001);
        assert!((lr_at(4, 0.001) - 0.0009).abs() < 1e-18);
        assert!((lr_at(13, 0.001) - 3.486784401e-4).abs() < 1e-15);
    }

    #[test]
    fn report_csv_has_one_row_per_epoch() {
        let r = TrainReport {
            seed: 3,
            epochs: vec![EpochRecord { epoch: 1, lr: 0.01, steps: 4, train_loss: 0.5, val: None, seconds: 0.1 }; 3],
            best_epoch: 3,
        };
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with(TrainReport::CSV_HEADER));
    }
}
