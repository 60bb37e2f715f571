use rand::Rng;

use super::{accumulate, ParamId, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{inverse_permutation, Tensor};
use crate::wavelet::kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bcast {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Param(ParamId),
    Linear { x: Var, w: Var, b: Option<Var> },
    Gelu(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Permute { x: Var, axes: Vec<usize> },
    Reshape(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Gather { x: Var, index: Vec<usize> },
    MeanLast(Var),
    Square(Var),
    SqrtShift(Var),
    BcastLast { kind: Bcast, x: Var, s: Var },
    ChannelAffine { x: Var, w: Var, b: Var, axis: usize, inverse: bool },
    BatchNorm { x: Var, gamma: Var, beta: Var, axis: usize, xhat: Vec<f64>, inv_std: Vec<f64>, batch_stats: bool },
    Dropout { x: Var, mask: Vec<f64> },
    DwtAnalysis { x: Var, filter: Vec<f64> },
    DwtSynthesis { a: Var, d: Var, g_lo: Vec<f64>, g_hi: Vec<f64> },
    Sum(Var),
    WeightedSum { x: Var, weights: Tensor },
    SmoothL1 { pred: Var, target: Tensor, beta: f64 },
    Mse { pred: Var, target: Tensor },
}

/// Per-channel statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormStats {
    pub mean: Vec<f64>,
    /// Biased (divide-by-N) variance.
    pub var: Vec<f64>,
    pub count: usize,
}

use super::normal::{cdf as std_normal_cdf, pdf as std_normal_pdf};

pub(crate) fn gelu_scalar(x: f64) -> f64 {
    x * std_normal_cdf(x)
}

/// `c[m×n] = a[m×k] · b[k×n]`, with either operand optionally transposed
/// in storage. Accumulates into `c` when `accumulate` is set.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], accumulate: bool) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover m*k, k*n and m*n elements for the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tape {
    /// `y[..., j] = sum_k x[..., k] * w[k, j] + b[j]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || xs.last() != ws.first() {
            return Err(Error::dim("linear", &xs, &ws));
        }
        let (k, n) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [n] {
                return Err(Error::dim("linear bias", &ws, self.shape(b)));
            }
        }
        let m = self.value(x).len() / k;
        let mut out = vec![0.0; m * n];
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.chunks_exact_mut(n) {
                row.copy_from_slice(bias);
            }
        }
        gemm(m, k, n, self.value(x).data(), false, self.value(w).data(), false, &mut out, b.is_some());
        let mut shape = xs;
        *shape.last_mut().unwrap() = n;
        Ok(self.push(Tensor::new(shape, out)?, Op::Linear { x, w, b }))
    }

    /// Exact-erf GELU, `x * Phi(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(gelu_scalar);
        self.push(y, Op::Gelu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, alpha: f64) -> Var {
        let y = self.value(x).scale(alpha);
        self.push(y, Op::Scale(x, alpha))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let y = self.value(x).permute(axes)?;
        Ok(self.push(y, Op::Permute { x, axes: axes.to_vec() }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshape(shape)?;
        Ok(self.push(y, Op::Reshape(x)))
    }

    /// Merges the last two axes.
    pub fn flatten_last2(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 {
            return Err(Error::dim("flatten", &s, &[]));
        }
        let mut shape = s[..s.len() - 2].to_vec();
        shape.push(s[s.len() - 2] * s[s.len() - 1]);
        self.reshape(x, &shape)
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(*parts.first().ok_or_else(|| Error::contract("concat of nothing"))?).to_vec();
        if axis >= first.len() {
            return Err(Error::dim("concat", &first, &[axis]));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible =
                s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &first, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = self.value(parts[0]).split_at_axis(axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat { parts: parts.to_vec(), axis }))
    }

    /// `y.flat[i] = x.flat[index[i]]`, reshaped to `shape`.
    pub fn gather(&mut self, x: Var, index: Vec<usize>, shape: &[usize]) -> Result<Var> {
        let src = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= src.len()) {
            return Err(Error::contract(format!("gather index {bad} out of range for {:?}", src.shape())));
        }
        let data = index.iter().map(|&i| src.data()[i]).collect();
        let y = Tensor::new(shape.to_vec(), data)?;
        Ok(self.push(y, Op::Gather { x, index }))
    }

    /// Mean over the last axis, which is dropped.
    pub fn mean_last(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let n = t.last_dim();
        let data = t.data().chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let shape = t.shape()[..t.rank() - 1].to_vec();
        let y = Tensor::new(shape, data).expect("mean_last shape");
        self.push(y, Op::MeanLast(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v * v);
        self.push(y, Op::Square(x))
    }

    /// `sqrt(x + shift)`.
    pub fn sqrt_shift(&mut self, x: Var, shift: f64) -> Var {
        let y = self.value(x).map(|v| (v + shift).sqrt());
        self.push(y, Op::SqrtShift(x))
    }

    /// Elementwise op between `x[..., l]` and `s[...]` broadcast along the last axis.
    pub(crate) fn bcast_last(&mut self, kind: Bcast, x: Var, s: Var) -> Result<Var> {
        let xs = self.shape(x);
        let ss = self.shape(s);
        if xs.len() != ss.len() + 1 || xs[..ss.len()] != *ss {
            return Err(Error::dim("broadcast", xs, ss));
        }
        let n = self.value(x).last_dim();
        let sv = self.value(s).data();
        let mut y = self.value(x).clone();
        for (row, &c) in y.data_mut().chunks_exact_mut(n).zip(sv) {
            for v in row {
                *v = match kind {
                    Bcast::Add => *v + c,
                    Bcast::Sub => *v - c,
                    Bcast::Mul => *v * c,
                    Bcast::Div => *v / c,
                };
            }
        }
        Ok(self.push(y, Op::BcastLast { kind, x, s }))
    }

    pub fn sub_last(&mut self, x: Var, s: Var) -> Result<Var> {
        self.bcast_last(Bcast::Sub, x, s)
    }

    pub fn add_last(&mut self, x: Var, s: Var) -> Result<Var> {
        self.bcast_last(Bcast::Add, x, s)
    }

    pub fn mul_last(&mut self, x: Var, s: Var) -> Result<Var> {
        self.bcast_last(Bcast::Mul, x, s)
    }

    pub fn div_last(&mut self, x: Var, s: Var) -> Result<Var> {
        self.bcast_last(Bcast::Div, x, s)
    }

    /// `y = x * w[c] + b[c]` with `c` indexing `axis`; with `inverse`,
    /// `y = (x - b[c]) / w[c]`.
    pub fn channel_affine(&mut self, x: Var, w: Var, b: Var, axis: usize, inverse: bool) -> Result<Var> {
        let t = self.value(x);
        if axis >= t.rank() || self.shape(w) != [t.shape()[axis]] || self.shape(b) != self.shape(w) {
            return Err(Error::dim("channel_affine", t.shape(), self.shape(w)));
        }
        let (outer, c, inner) = t.split_at_axis(axis);
        let (wv, bv) = (self.value(w).data(), self.value(b).data());
        let mut y = t.clone();
        let data = y.data_mut();
        for o in 0..outer {
            for ch in 0..c {
                let start = (o * c + ch) * inner;
                for v in &mut data[start..start + inner] {
                    *v = if inverse { (*v - bv[ch]) / wv[ch] } else { *v * wv[ch] + bv[ch] };
                }
            }
        }
        Ok(self.push(y, Op::ChannelAffine { x, w, b, axis, inverse }))
    }

    /// Batch norm using the batch's own biased statistics.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        axis: usize,
        eps: f64,
    ) -> Result<(Var, BatchNormStats)> {
        let t = self.value(x);
        self.check_bn(x, gamma, beta, axis)?;
        let (outer, c, inner) = t.split_at_axis(axis);
        let count = outer * inner;
        if count < 2 {
            return Err(Error::contract(format!(
                "training-mode batch norm needs at least 2 values per channel, got {count} for shape {:?}",
                t.shape()
            )));
        }
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        let data = t.data();
        for o in 0..outer {
            for (ch, m) in mean.iter_mut().enumerate() {
                let start = (o * c + ch) * inner;
                *m += data[start..start + inner].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        for o in 0..outer {
            for ch in 0..c {
                let start = (o * c + ch) * inner;
                var[ch] += data[start..start + inner].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let y = self.bn_apply(x, gamma, beta, axis, &mean, inv_std, true);
        Ok((y, BatchNormStats { mean, var, count }))
    }

    /// Batch norm using externally supplied (running) statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        axis: usize,
        eps: f64,
        mean: &[f64],
        var: &[f64],
    ) -> Result<Var> {
        self.check_bn(x, gamma, beta, axis)?;
        let c = self.shape(x)[axis];
        if mean.len() != c || var.len() != c {
            return Err(Error::dim("batch_norm stats", &[c], &[mean.len(), var.len()]));
        }
        let inv_std = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        Ok(self.bn_apply(x, gamma, beta, axis, mean, inv_std, false))
    }

    fn check_bn(&self, x: Var, gamma: Var, beta: Var, axis: usize) -> Result<()> {
        let s = self.shape(x);
        if axis >= s.len() || self.shape(gamma) != [s[axis]] || self.shape(beta) != [s[axis]] {
            return Err(Error::dim("batch_norm", s, self.shape(gamma)));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn bn_apply(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        axis: usize,
        mean: &[f64],
        inv_std: Vec<f64>,
        batch_stats: bool,
    ) -> Var {
        let t = self.value(x);
        let (outer, c, inner) = t.split_at_axis(axis);
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = t.data().to_vec();
        let mut y = t.clone();
        let yd = y.data_mut();
        let block = c * inner;
        debug_assert_eq!(xhat.len(), outer * block);
        for (xs, ys) in xhat.chunks_exact_mut(block).zip(yd.chunks_exact_mut(block)) {
            if inner == 1 {
                let per_channel = mean.iter().zip(&inv_std).zip(g.iter().zip(b));
                for ((xv, yv), ((m, s), (gg, bb))) in xs.iter_mut().zip(ys.iter_mut()).zip(per_channel) {
                    *xv = (*xv - m) * s;
                    *yv = gg * *xv + bb;
                }
                continue;
            }
            for (ch, (xr, yr)) in xs.chunks_exact_mut(inner).zip(ys.chunks_exact_mut(inner)).enumerate() {
                let (m, s, gg, bb) = (mean[ch], inv_std[ch], g[ch], b[ch]);
                for (xv, yv) in xr.iter_mut().zip(yr.iter_mut()) {
                    *xv = (*xv - m) * s;
                    *yv = gg * *xv + bb;
                }
            }
        }
        self.push(y, Op::BatchNorm { x, gamma, beta, axis, xhat, inv_std, batch_stats })
    }

    /// Inverted dropout. Returns `x` itself when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
        }
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        let mut y = self.value(x).clone();
        y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        Ok(self.push(y, Op::Dropout { x, mask }))
    }

    /// Stride-2 analysis filtering along the last axis (zero extension).
    pub fn dwt_analysis(&mut self, x: Var, filter: &[f64]) -> Result<Var> {
        let t = self.value(x);
        let n = t.last_dim();
        if t.is_empty() || n == 0 {
            return Err(Error::contract("wavelet analysis of an empty series"));
        }
        let out_len = (n + filter.len() - 1) / 2;
        let rows = t.len() / n;
        let mut out = vec![0.0; rows * out_len];
        kernel::analysis(t.data(), n, filter, &mut out, out_len);
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = out_len;
        Ok(self.push(Tensor::new(shape, out)?, Op::DwtAnalysis { x, filter: filter.to_vec() }))
    }

    /// Stride-2 synthesis from an approximation/detail pair, trimmed to `target_len`.
    pub fn dwt_synthesis(&mut self, a: Var, d: Var, g_lo: &[f64], g_hi: &[f64], target_len: usize) -> Result<Var> {
        if self.shape(a) != self.shape(d) {
            return Err(Error::dim("wavelet synthesis", self.shape(a), self.shape(d)));
        }
        let ta = self.value(a);
        let coeff_len = ta.last_dim();
        let rows = ta.len() / coeff_len;
        let mut out = vec![0.0; rows * target_len];
        kernel::synthesis(ta.data(), self.value(d).data(), coeff_len, g_lo, g_hi, &mut out, target_len);
        let mut shape = ta.shape().to_vec();
        *shape.last_mut().unwrap() = target_len;
        Ok(self.push(Tensor::new(shape, out)?, Op::DwtSynthesis { a, d, g_lo: g_lo.to_vec(), g_hi: g_hi.to_vec() }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// `sum_i x_i * weights_i` against a constant weight tensor.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        let t = self.value(x);
        if t.shape() != weights.shape() {
            return Err(Error::dim("weighted_sum", t.shape(), weights.shape()));
        }
        let s = t.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }))
    }

    /// Mean Huber-style loss with threshold `beta`.
    pub fn smooth_l1(&mut self, pred: Var, target: &Tensor, beta: f64) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::dim("smooth_l1", p.shape(), target.shape()));
        }
        let total: f64 = p.data().iter().zip(target.data()).map(|(a, b)| smooth_l1_elem(a - b, beta)).sum();
        let loss = total / p.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::SmoothL1 { pred, target: target.clone(), beta }))
    }

    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::dim("mse", p.shape(), target.shape()));
        }
        let total: f64 = p.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum();
        let loss = total / p.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target: target.clone() }))
    }
}

pub(crate) fn smooth_l1_elem(e: f64, beta: f64) -> f64 {
    if e.abs() < beta {
        0.5 * e * e / beta
    } else {
        e.abs() - 0.5 * beta
    }
}

fn smooth_l1_grad(e: f64, beta: f64) -> f64 {
    if e.abs() < beta {
        e / beta
    } else {
        e.signum()
    }
}

impl Op {
    pub(crate) fn backward(&self, tape: &Tape, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &tape.nodes[v.0].value;
        match self {
            Op::Leaf | Op::Param(_) => {}
            Op::Linear { x, w, b } => {
                let ws = val(*w).shape();
                let (k, n) = (ws[0], ws[1]);
                let m = g.len() / n;
                let mut gx = vec![0.0; m * k];
                gemm(m, n, k, g.data(), false, val(*w).data(), true, &mut gx, false);
                let mut gw = vec![0.0; k * n];
                gemm(k, m, n, val(*x).data(), true, g.data(), false, &mut gw, false);
                accumulate(grads, *x, Tensor::new(val(*x).shape().to_vec(), gx).unwrap());
                accumulate(grads, *w, Tensor::new(ws.to_vec(), gw).unwrap());
                if let Some(b) = b {
                    let mut gb = vec![0.0; n];
                    for row in g.data().chunks_exact(n) {
                        gb.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                    }
                    accumulate(grads, *b, Tensor::new(vec![n], gb).unwrap());
                }
            }
            Op::Gelu(x) => {
                let gx = val(*x).zip_with(g, "gelu", |v, gy| gy * (std_normal_cdf(v) + v * std_normal_pdf(v)));
                accumulate(grads, *x, gx.unwrap());
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Scale(x, alpha) => accumulate(grads, *x, g.scale(*alpha)),
            Op::Permute { x, axes } => {
                let gx = g.permute(&inverse_permutation(axes)).unwrap();
                accumulate(grads, *x, gx);
            }
            Op::Reshape(x) => {
                let gx = g.clone().reshape(val(*x).shape()).unwrap();
                accumulate(grads, *x, gx);
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = g.split_at_axis(*axis);
                let mut offset = 0;
                for &p in parts {
                    let shape = val(p).shape();
                    let width = shape[*axis] * inner;
                    let mut data = Vec::with_capacity(outer * width);
                    for o in 0..outer {
                        let start = o * total * inner + offset;
                        data.extend_from_slice(&g.data()[start..start + width]);
                    }
                    offset += width;
                    accumulate(grads, p, Tensor::new(shape.to_vec(), data).unwrap());
                }
            }
            Op::Gather { x, index } => {
                let mut gx = Tensor::zeros(val(*x).shape());
                let d = gx.data_mut();
                for (&i, &gv) in index.iter().zip(g.data()) {
                    d[i] += gv;
                }
                accumulate(grads, *x, gx);
            }
            Op::MeanLast(x) => {
                let xt = val(*x);
                let n = xt.last_dim();
                let mut gx = Tensor::zeros(xt.shape());
                for (row, &gv) in gx.data_mut().chunks_exact_mut(n).zip(g.data()) {
                    row.iter_mut().for_each(|v| *v = gv / n as f64);
                }
                accumulate(grads, *x, gx);
            }
            Op::Square(x) => {
                let gx = val(*x).zip_with(g, "square", |v, gy| 2.0 * v * gy).unwrap();
                accumulate(grads, *x, gx);
            }
            Op::SqrtShift(x) => {
                let y = &tape.nodes[idx].value;
                let gx = y.zip_with(g, "sqrt", |yv, gy| gy * 0.5 / yv).unwrap();
                accumulate(grads, *x, gx);
            }
            Op::BcastLast { kind, x, s } => {
                let xt = val(*x);
                let st = val(*s);
                let n = xt.last_dim();
                let mut gx = Tensor::zeros(xt.shape());
                let mut gs = Tensor::zeros(st.shape());
                let rows = gx
                    .data_mut()
                    .chunks_exact_mut(n)
                    .zip(g.data().chunks_exact(n))
                    .zip(xt.data().chunks_exact(n))
                    .zip(st.data().iter().zip(gs.data_mut()));
                for (((gx_row, g_row), x_row), (&c, gc)) in rows {
                    for ((gxv, &gy), &xv) in gx_row.iter_mut().zip(g_row).zip(x_row) {
                        match kind {
                            Bcast::Add => {
                                *gxv = gy;
                                *gc += gy;
                            }
                            Bcast::Sub => {
                                *gxv = gy;
                                *gc -= gy;
                            }
                            Bcast::Mul => {
                                *gxv = gy * c;
                                *gc += gy * xv;
                            }
                            Bcast::Div => {
                                *gxv = gy / c;
                                *gc -= gy * xv / (c * c);
                            }
                        }
                    }
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *s, gs);
            }
            Op::ChannelAffine { x, w, b, axis, inverse } => {
                let xt = val(*x);
                let (outer, c, inner) = xt.split_at_axis(*axis);
                let (wv, bv) = (val(*w).data(), val(*b).data());
                let mut gx = Tensor::zeros(xt.shape());
                let mut gw = vec![0.0; c];
                let mut gb = vec![0.0; c];
                let (xd, gd) = (xt.data(), g.data());
                let gxd = gx.data_mut();
                for o in 0..outer {
                    for ch in 0..c {
                        let start = (o * c + ch) * inner;
                        for i in start..start + inner {
                            if *inverse {
                                gxd[i] = gd[i] / wv[ch];
                                gb[ch] -= gd[i] / wv[ch];
                                gw[ch] -= gd[i] * (xd[i] - bv[ch]) / (wv[ch] * wv[ch]);
                            } else {
                                gxd[i] = gd[i] * wv[ch];
                                gb[ch] += gd[i];
                                gw[ch] += gd[i] * xd[i];
                            }
                        }
                    }
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *w, Tensor::new(vec![c], gw).unwrap());
                accumulate(grads, *b, Tensor::new(vec![c], gb).unwrap());
            }
            Op::BatchNorm { x, gamma, beta, axis, xhat, inv_std, batch_stats } => {
                let xt = val(*x);
                let (outer, c, inner) = xt.split_at_axis(*axis);
                let gam = val(*gamma).data();
                let gd = g.data();
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for o in 0..outer {
                    for ch in 0..c {
                        let start = (o * c + ch) * inner;
                        for i in start..start + inner {
                            sum_g[ch] += gd[i];
                            sum_gx[ch] += gd[i] * xhat[i];
                        }
                    }
                }
                let count = (outer * inner) as f64;
                let mut gx = Tensor::zeros(xt.shape());
                let gxd = gx.data_mut();
                for o in 0..outer {
                    for ch in 0..c {
                        let start = (o * c + ch) * inner;
                        let k = gam[ch] * inv_std[ch];
                        for i in start..start + inner {
                            gxd[i] = if *batch_stats {
                                k * (gd[i] - sum_g[ch] / count - xhat[i] * sum_gx[ch] / count)
                            } else {
                                k * gd[i]
                            };
                        }
                    }
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *gamma, Tensor::new(vec![c], sum_gx).unwrap());
                accumulate(grads, *beta, Tensor::new(vec![c], sum_g).unwrap());
            }
            Op::Dropout { x, mask } => {
                let mut gx = g.clone();
                gx.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                accumulate(grads, *x, gx);
            }
            Op::DwtAnalysis { x, filter } => {
                let xt = val(*x);
                let n = xt.last_dim();
                let mut gx = Tensor::zeros(xt.shape());
                kernel::analysis_adjoint(g.data(), g.last_dim(), filter, gx.data_mut(), n);
                accumulate(grads, *x, gx);
            }
            Op::DwtSynthesis { a, d, g_lo, g_hi } => {
                let at = val(*a);
                let coeff_len = at.last_dim();
                let mut ga = Tensor::zeros(at.shape());
                let mut gd = Tensor::zeros(at.shape());
                kernel::synthesis_adjoint(g.data(), g.last_dim(), g_lo, g_hi, ga.data_mut(), gd.data_mut(), coeff_len);
                accumulate(grads, *a, ga);
                accumulate(grads, *d, gd);
            }
            Op::Sum(x) => {
                accumulate(grads, *x, Tensor::full(val(*x).shape(), g.data()[0]));
            }
            Op::WeightedSum { x, weights } => {
                accumulate(grads, *x, weights.scale(g.data()[0]));
            }
            Op::SmoothL1 { pred, target, beta } => {
                let p = val(*pred);
                let k = g.data()[0] / p.len() as f64;
                let gx = p.zip_with(target, "smooth_l1", |a, b| k * smooth_l1_grad(a - b, *beta)).unwrap();
                accumulate(grads, *pred, gx);
            }
            Op::Mse { pred, target } => {
                let p = val(*pred);
                let k = 2.0 * g.data()[0] / p.len() as f64;
                let gx = p.zip_with(target, "mse", |a, b| k * (a - b)).unwrap();
                accumulate(grads, *pred, gx);
            }
        }
    }
}
