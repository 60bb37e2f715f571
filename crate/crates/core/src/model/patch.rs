use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Source positions, within one series of length `len`, of the `n` patches
/// of length `patch` taken with step `stride` after padding with copies of
/// the last value. Row-major `[n, patch]`.
pub fn patch_indices(len: usize, patch: usize, stride: usize, n: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(n * patch);
    for k in 0..n {
        for j in 0..patch {
            idx.push((k * stride + j).min(len - 1));
        }
    }
    idx
}

/// `[B, C, L] -> [B, C, N, P]` by repeating the last value `S` times and
/// sliding a length-`P` window with step `S`.
pub fn patch(tape: &mut Tape, x: Var, patch: usize, stride: usize, n: usize) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let [b, c, l] = shape[..] else {
        return Err(Error::dim("patch", &shape, &[0, 0, 0]));
    };
    if l == 0 || n == 0 || (n - 1) * stride + patch > l + stride {
        return Err(Error::config(format!(
            "{n} patches of length {patch} with stride {stride} do not fit a padded series of length {l}"
        )));
    }
    let row = patch_indices(l, patch, stride, n);
    let mut index = Vec::with_capacity(b * c * row.len());
    for r in 0..b * c {
        index.extend(row.iter().map(|&i| r * l + i));
    }
    tape.gather(x, index, &[b, c, n, patch])
}
