//! Central finite-difference verification of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::error::Result;
use crate::model::{Mode, ModelConfig, WPMixer};
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so that gradients which vanish
/// analytically (e.g. biases feeding a batch norm) are judged absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Worst agreement between analytic and numerical gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradReport {
    fn new() -> Self {
        Self { checked: 0, max_rel_error: 0.0, worst: String::new(), analytic: 0.0, numeric: 0.0 }
    }

    fn record(&mut self, name: String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = relative_error(analytic, numeric);
        if e > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = e;
            self.worst = name;
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }
}

/// Checks every scalar of every parameter of a freshly initialized model.
///
/// The loss is the mean squared error against a random target, evaluated in
/// training mode (batch statistics) with dropout disabled, on inputs drawn
/// uniformly from `[-2, 2]`.
pub fn check_model(config: &ModelConfig, batch: usize, seed: u64) -> Result<GradReport> {
    let mut cfg = config.clone();
    cfg.mixer_dropout = 0.0;
    cfg.embed_dropout = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = WPMixer::new(cfg.clone(), &mut rng)?;
    let x = Tensor::from_fn(&[batch, cfg.channels, cfg.seq_len], |_| rng.gen_range(-2.0..2.0));
    let target = Tensor::from_fn(&[batch, cfg.channels, cfg.pred_len], |_| rng.gen_range(-2.0..2.0));

    let loss = |model: &WPMixer| -> Result<f64> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let fp = model.forward(&mut tape, xv, &mut Mode::Train { rng: &mut r })?;
        let l = tape.mse(fp.output, &target)?;
        Ok(tape.value(l).data()[0])
    };

    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let fp = model.forward(&mut tape, xv, &mut Mode::Train { rng: &mut r })?;
    let l = tape.mse(fp.output, &target)?;
    let grads = tape.backward(l)?;
    model.params_mut().zero_grad();
    grads.accumulate_into(&tape, model.params_mut());

    let mut report = GradReport::new();
    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    for id in ids {
        let name = model.params().get(id).name.clone();
        let n = model.params().value(id).len();
        for i in 0..n {
            let analytic = model.params().get(id).grad.data()[i];
            let orig = model.params().value(id).data()[i];
            model.params_mut().get_mut(id).value.data_mut()[i] = orig + FD_STEP;
            let up = loss(&model)?;
            model.params_mut().get_mut(id).value.data_mut()[i] = orig - FD_STEP;
            let down = loss(&model)?;
            model.params_mut().get_mut(id).value.data_mut()[i] = orig;
            report.record(format!("{name}[{i}]"), analytic, (up - down) / (2.0 * FD_STEP));
        }
    }
    Ok(report)
}

/// The small configuration used for full-model gradient checks.
pub fn toy_config() -> ModelConfig {
    use crate::model::{Ablation, Activation, BnAxis};
    use crate::wavelet::Wavelet;
    ModelConfig {
        channels: 2,
        seq_len: 32,
        pred_len: 8,
        wavelet: Wavelet::Db2,
        level: 1,
        patch_len: 8,
        stride: 4,
        d_model: 8,
        tfactor: 2,
        dfactor: 2,
        mixer_dropout: 0.0,
        embed_dropout: 0.0,
        bn_axis: BnAxis::Embedding,
        activation: Activation::Gelu,
        ablation: Ablation::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-12, 0.0) - 1e-6).abs() < 1e-18);
    }
}
