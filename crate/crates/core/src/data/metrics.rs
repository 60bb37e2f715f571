use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Running sums for a streamed evaluation. Merging in a fixed order keeps
/// the result independent of how batches were scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorSums {
    pub sq: f64,
    pub abs: f64,
    pub count: usize,
}

impl ErrorSums {
    pub fn of(pred: &Tensor, target: &Tensor) -> Result<Self> {
        if pred.shape() != target.shape() {
            return Err(Error::dim("metrics", pred.shape(), target.shape()));
        }
        let mut s = Self::default();
        for (p, t) in pred.data().iter().zip(target.data()) {
            let e = p - t;
            s.sq += e * e;
            s.abs += e.abs();
        }
        s.count = pred.len();
        Ok(s)
    }

    pub fn merge(&mut self, other: &ErrorSums) {
        self.sq += other.sq;
        self.abs += other.abs;
        self.count += other.count;
    }

    pub fn finish(&self) -> Metrics {
        let n = self.count.max(1) as f64;
        Metrics { mse: self.sq / n, mae: self.abs / n }
    }
}

/// Mean squared and mean absolute error over all entries.
pub fn metrics(pred: &Tensor, target: &Tensor) -> Result<Metrics> {
    Ok(ErrorSums::of(pred, target)?.finish())
}
