use std::fmt;
use std::sync::Arc;

use super::SeriesTable;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stride-1 `(input, target)` pairs over a contiguous row range.
///
/// Window `i` has inputs at rows `[o - L + 1, o]` and targets at
/// `[o + 1, o + T]` with origin `o = first_origin + i`.
#[derive(Debug, Clone)]
pub struct Windows {
    pub part: Part,
    pub seq_len: usize,
    pub pred_len: usize,
    /// Table row of the first window's last input.
    pub first_origin: usize,
    count: usize,
    /// Channel-major copy of rows `[base, end)`.
    series: Arc<Vec<f64>>,
    base: usize,
    span: usize,
    channels: usize,
}

impl Windows {
    /// Windows whose targets lie in `[start, end)`. Inputs start at or after
    /// `start`, or, with `back_reach`, at or after `start - L`.
    pub fn new(
        table: &SeriesTable,
        part: Part,
        start: usize,
        end: usize,
        seq_len: usize,
        pred_len: usize,
        back_reach: bool,
    ) -> Result<Self> {
        let base = if back_reach { start.saturating_sub(seq_len) } else { start };
        let available = end - base;
        let required = seq_len + pred_len;
        if seq_len == 0 || pred_len == 0 || available < required {
            return Err(Error::SplitTooShort { part: part.as_str(), available, required });
        }
        // Targets must begin inside the part.
        let first_origin = (base + seq_len - 1).max(start.saturating_sub(1));
        let last_origin = end - pred_len - 1;
        if last_origin < first_origin {
            return Err(Error::SplitTooShort { part: part.as_str(), available: end - start, required: pred_len + 1 });
        }
        let c = table.channels();
        let span = end - base;
        let mut series = vec![0.0; c * span];
        for r in 0..span {
            for (ch, &v) in table.row(base + r).iter().enumerate() {
                series[ch * span + r] = v;
            }
        }
        Ok(Self {
            part,
            seq_len,
            pred_len,
            first_origin,
            count: last_origin - first_origin + 1,
            series: Arc::new(series),
            base,
            span,
            channels: c,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Row ranges `(input, target)` of window `i`, half-open.
    pub fn rows(&self, i: usize) -> ((usize, usize), (usize, usize)) {
        let o = self.first_origin + i;
        ((o + 1 - self.seq_len, o + 1), (o + 1, o + 1 + self.pred_len))
    }

    /// Stacks windows into `([B, C, L], [B, C, T])`.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let (c, l, t) = (self.channels, self.seq_len, self.pred_len);
        let mut x = Vec::with_capacity(indices.len() * c * l);
        let mut y = Vec::with_capacity(indices.len() * c * t);
        for &i in indices {
            assert!(i < self.count, "window {i} of {}", self.count);
            let ((xs, _), (ys, _)) = self.rows(i);
            for ch in 0..c {
                let row = &self.series[ch * self.span..(ch + 1) * self.span];
                x.extend_from_slice(&row[xs - self.base..xs - self.base + l]);
                y.extend_from_slice(&row[ys - self.base..ys - self.base + t]);
            }
        }
        let b = indices.len();
        (Tensor::new(vec![b, c, l], x).unwrap(), Tensor::new(vec![b, c, t], y).unwrap())
    }

    /// Keeps only the first `n` windows.
    pub fn truncate(&mut self, n: usize) {
        self.count = self.count.min(n);
    }
}
