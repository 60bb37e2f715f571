//! Analytic floating-point operation count of one eval-mode forward pass.
//!
//! Convention: a multiply-add is 2 FLOPs; batch norm, GELU and each RevIN
//! pass (statistics, standardize, affine) are 2 FLOPs per element; a bias or
//! residual add is 1 FLOP per element. Dropout is free at inference.

use crate::error::Result;
use crate::model::{Activation, ModelConfig};
use crate::wavelet;

pub const TERMS: [&str; 8] =
    ["revin", "dwt", "embedding", "patch_mixer", "embedding_mixer", "batch_norm", "head", "idwt"];

#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub batch: usize,
    /// Totals per term of [`TERMS`], for the whole batch.
    pub terms: Vec<(&'static str, u64)>,
}

impl FlopReport {
    pub fn total(&self) -> u64 {
        self.terms.iter().map(|t| t.1).sum()
    }

    pub fn gflops(&self) -> f64 {
        self.total() as f64 / 1e9
    }

    pub fn term(&self, name: &str) -> u64 {
        self.terms.iter().find(|t| t.0 == name).map_or(0, |t| t.1)
    }
}

fn linear(rows: usize, fan_in: usize, fan_out: usize) -> u64 {
    (rows * (2 * fan_in * fan_out + fan_out)) as u64
}

/// Counts one forward pass over `batch` windows.
pub fn count(cfg: &ModelConfig, batch: usize) -> Result<FlopReport> {
    cfg.validate()?;
    let a = cfg.ablation;
    let c = cfg.channels;
    let mut t = [0u64; 8];
    let [revin, dwt, embedding, patch_mixer, embedding_mixer, batch_norm, head, idwt] = &mut t;
    let act = if cfg.activation == Activation::Gelu { 2 } else { 0 };
    let rev = |n: usize, affine: bool| (c * n * if affine { 6 } else { 4 }) as u64;

    if a.outer_revin {
        *revin += rev(cfg.seq_len, true) + rev(cfg.pred_len, true) / 2;
    }
    if a.decomposition {
        let f = wavelet::filter_bank(cfg.wavelet)?.filter_len();
        let mut cur = cfg.seq_len;
        for _ in 0..cfg.level {
            cur = wavelet::coeff_len(cur, f);
            // Two filters of length F per output coefficient.
            *dwt += (c * 2 * cur * 2 * f) as u64;
        }
        let (_, inputs) = wavelet::auxiliary_lengths(cfg.pred_len, f, cfg.level)?;
        for &len in &inputs {
            // Each output sample gathers F/2 taps from each of two series.
            *idwt += (c * len * 2 * f) as u64;
        }
    }
    let mixers = if a.second_mixer { 2 } else { 1 };
    for b in cfg.branches()? {
        let (n, d) = (b.n_patches, b.d_model);
        let tokens = c * n;
        let elems = (tokens * d) as u64;
        if a.inner_revin {
            let aff = a.inner_affine;
            *revin += rev(b.coeff_len, aff) + rev(b.out_len, aff) / 2;
        }
        if a.embedding {
            *embedding += linear(tokens, b.patch_len, d);
        }
        for _ in 0..mixers {
            if a.patch_mixer {
                let h = n * b.tfactor;
                *batch_norm += 2 * elems;
                *patch_mixer += linear(c * d, n, h) + linear(c * d, h, n) + (act * c * d * h) as u64;
            }
            if a.embedding_mixer {
                let h = d * b.dfactor;
                *batch_norm += 2 * elems;
                *embedding_mixer += linear(tokens, d, h) + linear(tokens, h, d) + (act * tokens * h) as u64 + elems;
            }
        }
        if a.second_mixer {
            *patch_mixer += elems;
        }
        *batch_norm += 2 * elems;
        *head += linear(c, n * d, b.out_len);
    }
    let terms = TERMS.iter().zip(t).map(|(&name, v)| (name, v * batch as u64)).collect();
    Ok(FlopReport { batch, terms })
}
