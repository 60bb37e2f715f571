//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpmixer::{ModelConfig, Tensor, WPMixer, Wavelet};

/// Uniform values in [-2, 2).
pub fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-2.0..2.0))
}

/// The tuned ETTh1 horizon-96 architecture.
pub fn etth1_config() -> ModelConfig {
    ModelConfig {
        channels: 7,
        seq_len: 512,
        pred_len: 96,
        wavelet: Wavelet::Db2,
        level: 2,
        patch_len: 16,
        stride: 8,
        d_model: 256,
        tfactor: 5,
        dfactor: 8,
        mixer_dropout: 0.4,
        embed_dropout: 0.1,
        ..wpmixer::gradcheck::toy_config()
    }
}

/// A model whose batch-norm running statistics are usable for evaluation.
pub fn eval_ready(config: ModelConfig) -> WPMixer {
    let mut model = WPMixer::new(config, &mut ChaCha8Rng::seed_from_u64(0)).expect("valid config");
    for rs in model.running_stats_mut().values_mut() {
        rs.var.iter_mut().for_each(|v| *v = 1.0);
        rs.initialized = true;
    }
    model
}
