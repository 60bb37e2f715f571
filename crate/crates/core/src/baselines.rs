//! Reference forecasters evaluated under the same protocol as the model.

use nalgebra::DMatrix;

use crate::data::Windows;
use crate::error::{Error, Result};
use crate::model::WPMixer;
use crate::tensor::Tensor;

/// Maps `[B, C, L]` inputs to `[B, C, T]` forecasts.
pub trait Forecaster: Sync {
    fn forecast(&self, x: &Tensor) -> Result<Tensor>;
}

impl Forecaster for WPMixer {
    fn forecast(&self, x: &Tensor) -> Result<Tensor> {
        self.predict(x)
    }
}

/// Repeats the last observed value.
#[derive(Debug, Clone, Copy)]
pub struct Persistence {
    pub pred_len: usize,
}

impl Forecaster for Persistence {
    fn forecast(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 3 || s[2] == 0 {
            return Err(Error::dim("persistence", s, &[0, 0, 1]));
        }
        let (l, t) = (s[2], self.pred_len);
        let rows: Vec<f64> = x.data().chunks(l).map(|r| r[l - 1]).collect();
        Tensor::new(vec![s[0], s[1], t], rows.iter().flat_map(|&v| std::iter::repeat_n(v, t)).collect())
    }
}

/// Minimum-norm least-squares affine map from the `L` inputs of one channel
/// to its `T` targets, shared by all channels.
#[derive(Debug, Clone)]
pub struct LinearMap {
    /// `[L + 1, T]`, the last row is the bias.
    pub weights: DMatrix<f64>,
}

impl LinearMap {
    /// Fits on every window and channel of `windows` via the pseudo-inverse
    /// of the normal equations.
    pub fn fit(windows: &Windows) -> Result<Self> {
        let (l, t) = (windows.seq_len, windows.pred_len);
        let mut xtx = DMatrix::<f64>::zeros(l + 1, l + 1);
        let mut xty = DMatrix::<f64>::zeros(l + 1, t);
        let idx: Vec<usize> = (0..windows.len()).collect();
        for chunk in idx.chunks(256) {
            let (x, y) = windows.batch(chunk);
            let rows = x.len() / l;
            let mut xm = DMatrix::<f64>::from_element(rows, l + 1, 1.0);
            for (r, row) in x.data().chunks(l).enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    xm[(r, k)] = v;
                }
            }
            let ym = DMatrix::from_row_slice(rows, t, y.data());
            xtx += xm.transpose() * &xm;
            xty += xm.transpose() * ym;
        }
        let pinv = xtx.pseudo_inverse(1e-10).map_err(|e| Error::contract(format!("least-squares fit: {e}")))?;
        Ok(Self { weights: pinv * xty })
    }
}

impl Forecaster for LinearMap {
    fn forecast(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        let l = self.weights.nrows() - 1;
        if s.len() != 3 || s[2] != l {
            return Err(Error::dim("linear map", s, &[0, 0, l]));
        }
        let rows = s[0] * s[1];
        let mut xm = DMatrix::<f64>::from_element(rows, l + 1, 1.0);
        for (r, row) in x.data().chunks(l).enumerate() {
            for (k, &v) in row.iter().enumerate() {
                xm[(r, k)] = v;
            }
        }
        let y = xm * &self.weights;
        let t = y.ncols();
        let mut out = Vec::with_capacity(rows * t);
        for r in 0..rows {
            out.extend(y.row(r).iter());
        }
        Tensor::new(vec![s[0], s[1], t], out)
    }
}
