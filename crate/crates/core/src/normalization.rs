//! Reversible instance normalization.
//!
//! Each `(instance, channel)` row of a `[B, C, L]` tensor is standardized over
//! time with its own mean and standard deviation, then passed through a
//! learnable per-channel affine map. The statistics are kept so a forecast of
//! any length can be mapped back to the input's scale.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const REVIN_EPS: f64 = 1e-5;

/// Statistics captured by a normalization, consumed by the paired inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct RevInState {
    /// `[B, C]`
    pub mean: Tensor,
    /// `[B, C]`, equal to `sqrt(var + eps)` with biased variance.
    pub std: Tensor,
}

/// Per-channel affine parameters plus the state of the last normalization.
#[derive(Debug, Clone)]
pub struct RevIn {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    state: Option<RevInState>,
}

impl RevIn {
    /// Identity affine: weight 1, bias 0.
    pub fn new(channels: usize) -> Self {
        Self::with_affine(vec![1.0; channels], vec![0.0; channels])
    }

    pub fn with_affine(weight: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weight.len(), bias.len(), "affine weight/bias length");
        Self { weight, bias, state: None }
    }

    pub fn state(&self) -> Option<&RevInState> {
        self.state.as_ref()
    }

    pub fn normalize(&mut self, x: &Tensor) -> Result<Tensor> {
        let (b, c, l) = dims3(x, self.weight.len())?;
        if l == 0 {
            return Err(Error::contract("instance normalization of an empty series"));
        }
        let mut mean = vec![0.0; b * c];
        let mut std = vec![0.0; b * c];
        let mut y = x.clone();
        for (row_idx, row) in y.data_mut().chunks_exact_mut(l).enumerate() {
            let ch = row_idx % c;
            let mu = row.iter().sum::<f64>() / l as f64;
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / l as f64;
            let sd = (var + REVIN_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mu) / sd * self.weight[ch] + self.bias[ch];
            }
            mean[row_idx] = mu;
            std[row_idx] = sd;
        }
        self.state = Some(RevInState { mean: Tensor::new(vec![b, c], mean)?, std: Tensor::new(vec![b, c], std)? });
        Ok(y)
    }

    /// Exact inverse of the last [`normalize`](Self::normalize), for a
    /// series of any length.
    pub fn denormalize(&self, y: &Tensor) -> Result<Tensor> {
        let state = self.state.as_ref().ok_or_else(|| Error::contract("denormalize called before normalize"))?;
        let (b, c, l) = dims3(y, self.weight.len())?;
        if state.mean.shape() != [b, c] {
            return Err(Error::dim("revin_denormalize", state.mean.shape(), &[b, c]));
        }
        let mut x = y.clone();
        for (row_idx, row) in x.data_mut().chunks_exact_mut(l.max(1)).enumerate() {
            let ch = row_idx % c;
            let (mu, sd) = (state.mean.data()[row_idx], state.std.data()[row_idx]);
            for v in row.iter_mut() {
                *v = (*v - self.bias[ch]) / self.weight[ch] * sd + mu;
            }
        }
        Ok(x)
    }
}

fn dims3(x: &Tensor, channels: usize) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, c, l] if c == channels => Ok((b, c, l)),
        _ => Err(Error::dim("revin", x.shape(), &[0, channels, 0])),
    }
}

/// Normalization statistics living on a tape.
#[derive(Debug, Clone, Copy)]
pub struct RevInVars {
    pub mean: Var,
    pub std: Var,
}

/// Learnable affine of a tape-side RevIN: `(weight, bias)`, each `[C]`.
pub type AffineVars = (Var, Var);

/// Differentiable normalization of a `[B, C, L]` tape value. Gradients flow
/// through the statistics as well as through the affine map.
pub fn normalize_on_tape(tape: &mut Tape, x: Var, affine: Option<AffineVars>) -> Result<(Var, RevInVars)> {
    if tape.shape(x).len() != 3 {
        return Err(Error::dim("revin", tape.shape(x), &[0, 0, 0]));
    }
    let mean = tape.mean_last(x);
    let centered = tape.sub_last(x, mean)?;
    let sq = tape.square(centered);
    let var = tape.mean_last(sq);
    let std = tape.sqrt_shift(var, REVIN_EPS);
    let mut y = tape.div_last(centered, std)?;
    if let Some((w, b)) = affine {
        y = tape.channel_affine(y, w, b, 1, false)?;
    }
    Ok((y, RevInVars { mean, std }))
}

pub fn denormalize_on_tape(tape: &mut Tape, y: Var, state: RevInVars, affine: Option<AffineVars>) -> Result<Var> {
    let mut x = y;
    if let Some((w, b)) = affine {
        x = tape.channel_affine(x, w, b, 1, true)?;
    }
    let scaled = tape.mul_last(x, state.std)?;
    tape.add_last(scaled, state.mean)
}
