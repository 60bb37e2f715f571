use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{self, coeff_len, max_level, Wavelet};

/// Which axis of a `[B, C, N, d]` activation the mixer batch norms treat as
/// channels. Statistics are taken over the remaining three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BnAxis {
    #[default]
    Embedding,
    Variate,
    Patch,
}

impl BnAxis {
    pub(crate) fn axis(self) -> usize {
        match self {
            BnAxis::Variate => 1,
            BnAxis::Patch => 2,
            BnAxis::Embedding => 3,
        }
    }
}

/// Mixer nonlinearity. `Identity` exists for linearity tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Gelu,
    Identity,
}

/// Stage toggles. Everything on is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub decomposition: bool,
    pub patching: bool,
    pub embedding: bool,
    pub patch_mixer: bool,
    pub embedding_mixer: bool,
    pub second_mixer: bool,
    pub outer_revin: bool,
    pub inner_revin: bool,
    pub inner_affine: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            decomposition: true,
            patching: true,
            embedding: true,
            patch_mixer: true,
            embedding_mixer: true,
            second_mixer: true,
            outer_revin: true,
            inner_revin: true,
            inner_affine: true,
        }
    }
}

impl Ablation {
    /// Toggles for one row of the module-contribution study: decomposition,
    /// patching, embedding, patch mixer, embedding mixer. The head is always on.
    pub fn case(d: bool, p: bool, e: bool, px: bool, ex: bool) -> Self {
        Self { decomposition: d, patching: p, embedding: e, patch_mixer: px, embedding_mixer: ex, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    pub seq_len: usize,
    pub pred_len: usize,
    pub wavelet: Wavelet,
    pub level: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub d_model: usize,
    pub tfactor: usize,
    pub dfactor: usize,
    #[serde(default)]
    pub mixer_dropout: f64,
    #[serde(default)]
    pub embed_dropout: f64,
    #[serde(default)]
    pub bn_axis: BnAxis,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub ablation: Ablation,
}

/// Derived geometry of one resolution branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchConfig {
    /// Coefficient series length `L_i`.
    pub coeff_len: usize,
    /// Predicted coefficient length `T_i`.
    pub out_len: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub n_patches: usize,
    /// Width after embedding (`patch_len` when embedding is off).
    pub d_model: usize,
    pub tfactor: usize,
    pub dfactor: usize,
}

/// Patches over a series of length `len` padded with `stride` copies of its
/// last value: `floor((len + stride - patch) / stride) + 1`. Equals
/// `(len - patch) / stride + 2` whenever the stride divides `len - patch`.
pub fn patch_count(len: usize, patch: usize, stride: usize) -> Result<usize> {
    if patch == 0 || stride == 0 || stride > patch {
        return Err(Error::config(format!(
            "patch length {patch} and stride {stride} must satisfy 1 <= stride <= patch"
        )));
    }
    if len + stride < patch {
        return Err(Error::config(format!(
            "series of length {len} is shorter than patch {patch} minus stride {stride}"
        )));
    }
    Ok((len + stride - patch) / stride + 1)
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channels", self.channels),
            ("seq_len", self.seq_len),
            ("pred_len", self.pred_len),
            ("patch_len", self.patch_len),
            ("stride", self.stride),
            ("d_model", self.d_model),
            ("tfactor", self.tfactor),
            ("dfactor", self.dfactor),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (name, p) in [("mixer_dropout", self.mixer_dropout), ("embed_dropout", self.embed_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} outside [0, 1)")));
            }
        }
        self.branches().map(|_| ())
    }

    pub fn branch_count(&self) -> usize {
        if self.ablation.decomposition {
            self.level + 1
        } else {
            1
        }
    }

    /// Input and output lengths per branch, ordered `[A_m, D_m, ..., D_1]`.
    pub fn series_lengths(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        if !self.ablation.decomposition {
            return Ok((vec![self.seq_len], vec![self.pred_len]));
        }
        let f = wavelet::filter_bank(self.wavelet)?.filter_len();
        let max = max_level(self.seq_len, f);
        if self.level == 0 || self.level > max {
            return Err(Error::DecompositionDepth {
                level: self.level,
                len: self.seq_len,
                filter_len: f,
                max_level: max,
            });
        }
        let mut cur = self.seq_len;
        let mut details = Vec::with_capacity(self.level);
        for _ in 0..self.level {
            cur = coeff_len(cur, f);
            details.push(cur);
        }
        let mut inputs = vec![cur];
        inputs.extend(details.into_iter().rev());
        let (outputs, _) = wavelet::auxiliary_lengths(self.pred_len, f, self.level)?;
        Ok((inputs, outputs))
    }

    pub fn branches(&self) -> Result<Vec<BranchConfig>> {
        let (inputs, outputs) = self.series_lengths()?;
        inputs
            .iter()
            .zip(&outputs)
            .enumerate()
            .map(|(j, (&l, &t))| self.branch(l, t).map_err(|e| e.in_branch(j)))
            .collect()
    }

    fn branch(&self, coeff_len: usize, out_len: usize) -> Result<BranchConfig> {
        let (patch_len, stride, n_patches) = if self.ablation.patching {
            let n = patch_count(coeff_len, self.patch_len, self.stride)?;
            (self.patch_len, self.stride, n)
        } else {
            (coeff_len, coeff_len, 1)
        };
        let d_model = if self.ablation.embedding { self.d_model } else { patch_len };
        Ok(BranchConfig {
            coeff_len,
            out_len,
            patch_len,
            stride,
            n_patches,
            d_model,
            tfactor: self.tfactor,
            dfactor: self.dfactor,
        })
    }

    /// Width of the mixer batch-norm channel axis for a branch.
    pub(crate) fn bn_width(&self, b: &BranchConfig) -> usize {
        match self.bn_axis {
            BnAxis::Embedding => b.d_model,
            BnAxis::Variate => self.channels,
            BnAxis::Patch => b.n_patches,
        }
    }

    /// Closed-form parameter count.
    ///
    /// Per branch: inner affine `2C`, embedding `P d + d`, per mixer module a
    /// patch MLP `2 N^2 t_f + N t_f + N` and an embedding MLP
    /// `2 d^2 d_f + d d_f + d`, each behind a batch norm of `2 W` (W the
    /// batch-norm width), the post-stack batch norm `2 W`, and the head
    /// `N d T_i + T_i`. The outer affine adds `2C`.
    pub fn param_count(&self) -> Result<usize> {
        let c = self.channels;
        let a = &self.ablation;
        let mut total = if a.outer_revin { 2 * c } else { 0 };
        for b in self.branches()? {
            let (n, d, w) = (b.n_patches, b.d_model, self.bn_width(&b));
            if a.inner_revin && a.inner_affine {
                total += 2 * c;
            }
            if a.embedding {
                total += b.patch_len * d + d;
            }
            let mut module = 0;
            if a.patch_mixer {
                module += 2 * w + 2 * n * n * b.tfactor + n * b.tfactor + n;
            }
            if a.embedding_mixer {
                module += 2 * w + 2 * d * d * b.dfactor + d * b.dfactor + d;
            }
            total += module * if a.second_mixer { 2 } else { 1 };
            total += 2 * w;
            total += n * d * b.out_len + b.out_len;
        }
        Ok(total)
    }
}
