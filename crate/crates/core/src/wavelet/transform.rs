use super::{kernel, Wavelet, WaveletFilterBank};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output length of one analysis level: `floor((len + filter_len - 1) / 2)`.
pub fn coeff_len(len: usize, filter_len: usize) -> usize {
    (len + filter_len - 1) / 2
}

/// Deepest level whose every input is at least one filter long.
///
/// Under zero extension lengths never reach zero; they shrink only while the
/// level input is at least `filter_len`, after which deeper levels carry no
/// new resolution.
pub fn max_level(len: usize, filter_len: usize) -> usize {
    let mut level = 0;
    let mut cur = len;
    while cur >= filter_len {
        cur = coeff_len(cur, filter_len);
        level += 1;
    }
    level
}

fn check_depth(len: usize, filter_len: usize, level: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::contract("wavelet transform of an empty series"));
    }
    let max = max_level(len, filter_len);
    if level == 0 || level > max {
        return Err(Error::DecompositionDepth { level, len, filter_len, max_level: max });
    }
    Ok(())
}

/// Approximation and detail series of one multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub wavelet: Wavelet,
    pub approx: Tensor,
    /// Ordered from the deepest level `m` down to level 1.
    pub details: Vec<Tensor>,
    /// Length of the series entering each level, level 1 first.
    pub input_lens: Vec<usize>,
}

impl CoefficientSet {
    pub fn level(&self) -> usize {
        self.details.len()
    }

    /// Series in branch order: `[A_m, D_m, ..., D_1]`.
    pub fn series(&self) -> impl Iterator<Item = &Tensor> {
        std::iter::once(&self.approx).chain(self.details.iter())
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.series().map(Tensor::last_dim).collect()
    }

    /// `alpha * self + beta * other`, coefficient by coefficient.
    pub fn combine(&self, alpha: f64, other: &CoefficientSet, beta: f64) -> Result<CoefficientSet> {
        let lin = |a: &Tensor, b: &Tensor| a.zip_with(b, "combine", |x, y| alpha * x + beta * y);
        Ok(CoefficientSet {
            wavelet: self.wavelet,
            approx: lin(&self.approx, &other.approx)?,
            details: self.details.iter().zip(&other.details).map(|(a, b)| lin(a, b)).collect::<Result<_>>()?,
            input_lens: self.input_lens.clone(),
        })
    }
}

fn with_last(shape: &[usize], last: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    *s.last_mut().unwrap() = last;
    s
}

/// One analysis level along the last axis.
pub fn dwt_step(x: &Tensor, bank: &WaveletFilterBank) -> Result<(Tensor, Tensor)> {
    let n = x.last_dim();
    if x.is_empty() || n == 0 {
        return Err(Error::contract("wavelet analysis of an empty series"));
    }
    let out_len = coeff_len(n, bank.filter_len());
    let rows = x.len() / n;
    let mut a = vec![0.0; rows * out_len];
    let mut d = vec![0.0; rows * out_len];
    kernel::analysis(x.data(), n, &bank.dec_lo, &mut a, out_len);
    kernel::analysis(x.data(), n, &bank.dec_hi, &mut d, out_len);
    let shape = with_last(x.shape(), out_len);
    Ok((Tensor::new(shape.clone(), a)?, Tensor::new(shape, d)?))
}

/// One synthesis level, trimmed to `target_len`.
pub fn idwt_step(approx: &Tensor, detail: &Tensor, bank: &WaveletFilterBank, target_len: usize) -> Result<Tensor> {
    if approx.shape() != detail.shape() {
        return Err(Error::contract(format!(
            "approximation {:?} and detail {:?} differ in shape",
            approx.shape(),
            detail.shape()
        )));
    }
    let coeff = approx.last_dim();
    let rows = approx.len() / coeff.max(1);
    let mut out = vec![0.0; rows * target_len];
    kernel::synthesis(approx.data(), detail.data(), coeff, &bank.rec_lo, &bank.rec_hi, &mut out, target_len);
    Tensor::new(with_last(approx.shape(), target_len), out)
}

/// `level`-deep decomposition keeping only the final approximation.
pub fn decompose(x: &Tensor, wavelet: Wavelet, bank: &WaveletFilterBank, level: usize) -> Result<CoefficientSet> {
    check_depth(x.last_dim(), bank.filter_len(), level)?;
    let mut approx = x.clone();
    let mut details = Vec::with_capacity(level);
    let mut input_lens = Vec::with_capacity(level);
    for _ in 0..level {
        input_lens.push(approx.last_dim());
        let (a, d) = dwt_step(&approx, bank)?;
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(CoefficientSet { wavelet, approx, details, input_lens })
}

/// Inverts [`decompose`] level by level; the result has length `target_len`.
pub fn reconstruct(coeffs: &CoefficientSet, bank: &WaveletFilterBank, target_len: usize) -> Result<Tensor> {
    check_consistent(&coeffs.lengths(), &coeffs.input_lens, bank.filter_len())?;
    let m = coeffs.level();
    let mut approx = coeffs.approx.clone();
    for (depth, detail) in coeffs.details.iter().enumerate() {
        let level = m - depth;
        let target = if level == 1 { target_len } else { coeffs.input_lens[level - 1] };
        approx = idwt_step(&approx, detail, bank, target)?;
    }
    Ok(approx)
}

fn check_consistent(lengths: &[usize], input_lens: &[usize], filter_len: usize) -> Result<()> {
    let m = lengths.len() - 1;
    if input_lens.len() != m {
        return Err(Error::contract(format!("{m} detail series but {} recorded level lengths", input_lens.len())));
    }
    for level in 1..=m {
        let expected = coeff_len(input_lens[level - 1], filter_len);
        let approx_ok = level < m || lengths[0] == expected;
        if lengths[m + 1 - level] != expected || !approx_ok {
            return Err(Error::contract(format!(
                "level {level}: coefficient length {} does not follow from input length {} ({} expected)",
                lengths[m + 1 - level],
                input_lens[level - 1],
                expected
            )));
        }
        if level < m && input_lens[level] != expected {
            return Err(Error::contract(format!(
                "level {} input length {} should equal level {level} output {expected}",
                level + 1,
                input_lens[level]
            )));
        }
    }
    Ok(())
}

/// Branch output lengths `[T_A, T_Dm, ..., T_D1]` and the per-level input
/// lengths obtained by decomposing a length-`horizon` series.
pub fn auxiliary_lengths(horizon: usize, filter_len: usize, level: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    check_depth(horizon, filter_len, level)?;
    let mut input_lens = Vec::with_capacity(level);
    let mut cur = horizon;
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        input_lens.push(cur);
        cur = coeff_len(cur, filter_len);
        details.push(cur);
    }
    details.reverse();
    let mut lens = vec![cur];
    lens.extend(details);
    Ok((lens, input_lens))
}

/// Decomposition recorded on a tape.
#[derive(Debug, Clone)]
pub struct CoefficientVars {
    /// `[A_m, D_m, ..., D_1]`.
    pub series: Vec<Var>,
    pub input_lens: Vec<usize>,
}

pub fn decompose_on_tape(tape: &mut Tape, x: Var, bank: &WaveletFilterBank, level: usize) -> Result<CoefficientVars> {
    check_depth(tape.shape(x).last().copied().unwrap_or(0), bank.filter_len(), level)?;
    let mut approx = x;
    let mut details = Vec::with_capacity(level);
    let mut input_lens = Vec::with_capacity(level);
    for _ in 0..level {
        input_lens.push(*tape.shape(approx).last().unwrap());
        let d = tape.dwt_analysis(approx, &bank.dec_hi)?;
        approx = tape.dwt_analysis(approx, &bank.dec_lo)?;
        details.push(d);
    }
    let mut series = vec![approx];
    series.extend(details.into_iter().rev());
    Ok(CoefficientVars { series, input_lens })
}

/// Reconstruction from `[A_m, D_m, ..., D_1]` recorded on a tape.
pub fn reconstruct_on_tape(
    tape: &mut Tape,
    series: &[Var],
    input_lens: &[usize],
    bank: &WaveletFilterBank,
    target_len: usize,
) -> Result<Var> {
    let lengths: Vec<usize> = series.iter().map(|&v| *tape.shape(v).last().unwrap()).collect();
    check_consistent(&lengths, input_lens, bank.filter_len())?;
    let m = series.len() - 1;
    let mut approx = series[0];
    for (depth, &detail) in series[1..].iter().enumerate() {
        let level = m - depth;
        let target = if level == 1 { target_len } else { input_lens[level - 1] };
        approx = tape.dwt_synthesis(approx, detail, &bank.rec_lo, &bank.rec_hi, target)?;
    }
    Ok(approx)
}
