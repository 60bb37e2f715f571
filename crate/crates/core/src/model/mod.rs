//! The multi-resolution forecaster.
//!
//! `forward` runs, for a `[B, C, L]` batch: outer RevIN, wavelet
//! decomposition, then per coefficient series an inner RevIN, patching,
//! embedding, two mixer modules, a flatten+linear head and the inner inverse
//! RevIN; the predicted coefficient series are reassembled by the inverse
//! transform and the outer RevIN is undone.

mod config;
mod patch;

pub use config::{patch_count, Ablation, Activation, BnAxis, BranchConfig, ModelConfig};
pub use patch::{patch, patch_indices};

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{BatchNormStats, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::normalization::{denormalize_on_tape, normalize_on_tape, AffineVars};
use crate::tensor::Tensor;
use crate::wavelet::{self, WaveletFilterBank};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Running statistics of one batch-norm site.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    /// Unbiased running variance.
    pub var: Vec<f64>,
    pub initialized: bool,
}

impl RunningStats {
    fn new(width: usize) -> Self {
        Self { mean: vec![0.0; width], var: vec![1.0; width], initialized: false }
    }

    fn update(&mut self, batch: &BatchNormStats) {
        let n = batch.count as f64;
        let unbias = if batch.count > 1 { n / (n - 1.0) } else { 1.0 };
        for ((rm, rv), (&m, &v)) in self.mean.iter_mut().zip(self.var.iter_mut()).zip(batch.mean.iter().zip(&batch.var))
        {
            *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * m;
            *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * v * unbias;
        }
        self.initialized = true;
    }
}

/// Forward-pass mode. Training draws dropout masks from `rng` and normalizes
/// with batch statistics.
pub enum Mode<'a> {
    Train { rng: &'a mut ChaCha8Rng },
    Eval,
}

impl Mode<'_> {
    fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

/// Tape handles produced by [`WPMixer::forward`].
#[derive(Debug)]
pub struct ForwardPass {
    /// `[B, C, T]`
    pub output: Var,
    /// Predicted coefficient series entering reconstruction, `[A_m, D_m, ..., D_1]`.
    pub branch_outputs: Vec<Var>,
    /// Batch statistics seen by each batch norm in training mode.
    pub bn_stats: Vec<(String, BatchNormStats)>,
}

#[derive(Debug, Clone)]
pub struct WPMixer {
    config: ModelConfig,
    branches: Vec<BranchConfig>,
    bank: WaveletFilterBank,
    /// Reconstruction target lengths recorded by decomposing a length-`T` series.
    aux_input_lens: Vec<usize>,
    params: ParamStore,
    running: BTreeMap<String, RunningStats>,
}

impl WPMixer {
    /// Builds the model, drawing linear weights and biases uniformly from
    /// `+-1/sqrt(fan_in)`. Batch-norm scales start at 1, shifts and RevIN
    /// biases at 0, RevIN weights at 1.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let branches = config.branches()?;
        let bank = wavelet::filter_bank(config.wavelet)?;
        let aux_input_lens = if config.ablation.decomposition {
            wavelet::auxiliary_lengths(config.pred_len, bank.filter_len(), config.level)?.1
        } else {
            Vec::new()
        };
        let mut model =
            Self { config, branches, bank, aux_input_lens, params: ParamStore::new(), running: BTreeMap::new() };
        model.init_params(rng);
        Ok(model)
    }

    fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let cfg = self.config.clone();
        let a = cfg.ablation;
        let c = cfg.channels;
        let p = &mut self.params;
        let mut linear = |p: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..bound)).collect() };
            let w = Tensor::new(vec![fan_in, fan_out], draw(fan_in * fan_out)).unwrap();
            let b = Tensor::new(vec![fan_out], draw(fan_out)).unwrap();
            p.insert(format!("{name}.weight"), w);
            p.insert(format!("{name}.bias"), b);
        };
        let affine = |p: &mut ParamStore, name: &str, width: usize| {
            p.insert(format!("{name}.weight"), Tensor::full(&[width], 1.0));
            p.insert(format!("{name}.bias"), Tensor::zeros(&[width]));
        };
        if a.outer_revin {
            affine(p, "revin", c);
        }
        for (j, b) in self.branches.iter().enumerate() {
            let w = cfg.bn_width(b);
            let (n, d) = (b.n_patches, b.d_model);
            if a.inner_revin && a.inner_affine {
                affine(p, &format!("b{j}.revin"), c);
            }
            if a.embedding {
                linear(p, &format!("b{j}.embed"), b.patch_len, d);
            }
            for k in mixer_ids(&cfg) {
                if a.patch_mixer {
                    let pre = format!("b{j}.mix{k}.patch");
                    affine(p, &format!("{pre}.bn"), w);
                    self.running.insert(format!("{pre}.bn"), RunningStats::new(w));
                    linear(p, &format!("{pre}.fc1"), n, n * b.tfactor);
                    linear(p, &format!("{pre}.fc2"), n * b.tfactor, n);
                }
                if a.embedding_mixer {
                    let pre = format!("b{j}.mix{k}.embed");
                    affine(p, &format!("{pre}.bn"), w);
                    self.running.insert(format!("{pre}.bn"), RunningStats::new(w));
                    linear(p, &format!("{pre}.fc1"), d, d * b.dfactor);
                    linear(p, &format!("{pre}.fc2"), d * b.dfactor, d);
                }
            }
            affine(p, &format!("b{j}.norm"), w);
            self.running.insert(format!("b{j}.norm"), RunningStats::new(w));
            linear(p, &format!("b{j}.head"), n * d, b.out_len);
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn branches(&self) -> &[BranchConfig] {
        &self.branches
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn running_stats(&self) -> &BTreeMap<String, RunningStats> {
        &self.running
    }

    pub fn running_stats_mut(&mut self) -> &mut BTreeMap<String, RunningStats> {
        &mut self.running
    }

    /// Folds training-mode batch statistics into the running estimates.
    pub fn commit_bn(&mut self, stats: &[(String, BatchNormStats)]) {
        for (name, s) in stats {
            if let Some(r) = self.running.get_mut(name) {
                r.update(s);
            }
        }
    }

    /// Records the forward graph for `x: [B, C, L]` on `tape`.
    pub fn forward(&self, tape: &mut Tape, x: Var, mode: &mut Mode<'_>) -> Result<ForwardPass> {
        let cfg = &self.config;
        let shape = tape.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != cfg.channels || shape[2] != cfg.seq_len {
            return Err(Error::dim("forward", &shape, &[0, cfg.channels, cfg.seq_len]));
        }
        let mut bn_stats = Vec::new();
        let mut cx = Ctx { model: self, tape, mode, bn_stats: &mut bn_stats };
        let outer = if cfg.ablation.outer_revin {
            let aff = cx.affine("revin");
            let (y, st) = normalize_on_tape(cx.tape, x, Some(aff))?;
            Some((y, st, aff))
        } else {
            None
        };
        let h = outer.map_or(x, |o| o.0);
        let series = if cfg.ablation.decomposition {
            wavelet::decompose_on_tape(cx.tape, h, &self.bank, cfg.level)?.series
        } else {
            vec![h]
        };
        let mut branch_outputs = Vec::with_capacity(series.len());
        for (j, &s) in series.iter().enumerate() {
            branch_outputs.push(cx.branch(j, s).map_err(|e| e.in_branch(j))?);
        }
        let mut y = if cfg.ablation.decomposition {
            wavelet::reconstruct_on_tape(cx.tape, &branch_outputs, &self.aux_input_lens, &self.bank, cfg.pred_len)?
        } else {
            branch_outputs[0]
        };
        if let Some((_, st, aff)) = outer {
            y = denormalize_on_tape(cx.tape, y, st, Some(aff))?;
        }
        Ok(ForwardPass { output: y, branch_outputs, bn_stats })
    }

    /// Eval-mode prediction for `x: [B, C, L]`, returning `[B, C, T]`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let out = self.forward(&mut tape, xv, &mut Mode::Eval)?.output;
        Ok(tape.value(out).clone())
    }
}

fn mixer_ids(cfg: &ModelConfig) -> &'static [usize] {
    if cfg.ablation.second_mixer {
        &[1, 2]
    } else {
        &[1]
    }
}

struct Ctx<'m, 't, 'r, 'a> {
    model: &'m WPMixer,
    tape: &'t mut Tape,
    mode: &'r mut Mode<'a>,
    bn_stats: &'r mut Vec<(String, BatchNormStats)>,
}

impl Ctx<'_, '_, '_, '_> {
    fn param(&mut self, name: &str) -> Var {
        let id = self.model.params.id(name).unwrap_or_else(|| panic!("parameter {name} was never allocated"));
        self.tape.param(&self.model.params, id)
    }

    fn affine(&mut self, prefix: &str) -> AffineVars {
        (self.param(&format!("{prefix}.weight")), self.param(&format!("{prefix}.bias")))
    }

    fn linear(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let (w, b) = self.affine(prefix);
        self.tape.linear(x, w, Some(b))
    }

    fn activation(&mut self, x: Var) -> Var {
        match self.model.config.activation {
            Activation::Gelu => self.tape.gelu(x),
            Activation::Identity => x,
        }
    }

    fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        match self.mode {
            Mode::Train { rng } => self.tape.dropout(x, p, &mut **rng),
            Mode::Eval => Ok(x),
        }
    }

    fn batch_norm(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let (g, b) = self.affine(prefix);
        let axis = self.model.config.bn_axis.axis();
        if self.mode.is_train() {
            let (y, stats) = self.tape.batch_norm_train(x, g, b, axis, BN_EPS)?;
            self.bn_stats.push((prefix.to_string(), stats));
            Ok(y)
        } else {
            let rs = &self.model.running[prefix];
            if !rs.initialized {
                return Err(Error::UninitializedStats(prefix.to_string()));
            }
            self.tape.batch_norm_eval(x, g, b, axis, BN_EPS, &rs.mean, &rs.var)
        }
    }

    /// One coefficient series `[B, C, L_i]` to its prediction `[B, C, T_i]`.
    fn branch(&mut self, j: usize, x: Var) -> Result<Var> {
        let cfg = self.model.config.clone();
        let a = cfg.ablation;
        let br = self.model.branches[j];
        let inner = if a.inner_revin {
            let aff = a.inner_affine.then(|| self.affine(&format!("b{j}.revin")));
            let (y, st) = normalize_on_tape(self.tape, x, aff)?;
            Some((y, st, aff))
        } else {
            None
        };
        let h = inner.map_or(x, |i| i.0);
        let mut h = patch(self.tape, h, br.patch_len, br.stride, br.n_patches)?;
        if a.embedding {
            h = self.linear(h, &format!("b{j}.embed"))?;
            h = self.dropout(h, cfg.embed_dropout)?;
        }
        let y1 = self.mixer(h, j, 1, &br)?;
        let s = if a.second_mixer {
            let y = self.mixer(y1, j, 2, &br)?;
            self.tape.add(y1, y)?
        } else {
            y1
        };
        let y2 = self.batch_norm(s, &format!("b{j}.norm"))?;
        let flat = self.tape.flatten_last2(y2)?;
        let mut out = self.linear(flat, &format!("b{j}.head"))?;
        if let Some((_, st, aff)) = inner {
            out = denormalize_on_tape(self.tape, out, st, aff)?;
        }
        Ok(out)
    }

    /// Patch mixer then embedding mixer over `[B, C, N, d]`.
    fn mixer(&mut self, x: Var, j: usize, k: usize, br: &BranchConfig) -> Result<Var> {
        let a = self.model.config.ablation;
        let p = self.model.config.mixer_dropout;
        let mut h = x;
        if a.patch_mixer {
            let pre = format!("b{j}.mix{k}.patch");
            let z = self.batch_norm(h, &format!("{pre}.bn"))?;
            let z = self.tape.permute(z, &[0, 3, 1, 2])?;
            let z = self.linear(z, &format!("{pre}.fc1"))?;
            let z = self.activation(z);
            let z = self.linear(z, &format!("{pre}.fc2"))?;
            let z = self.dropout(z, p)?;
            h = self.tape.permute(z, &[0, 2, 3, 1])?;
        }
        if a.embedding_mixer {
            let pre = format!("b{j}.mix{k}.embed");
            let z = self.batch_norm(h, &format!("{pre}.bn"))?;
            let m = self.linear(z, &format!("{pre}.fc1"))?;
            let m = self.activation(m);
            let m = self.linear(m, &format!("{pre}.fc2"))?;
            let m = self.dropout(m, p)?;
            h = self.tape.add(z, m)?;
        }
        debug_assert_eq!(self.tape.shape(h)[2], br.n_patches);
        Ok(h)
    }
}

#[cfg(test)]
mod tests;
