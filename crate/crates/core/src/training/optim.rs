use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bias-corrected adaptive-moment optimizer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update with the gradients stored in `params`. Every
    /// gradient is checked before anything is modified.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64) -> Result<()> {
        if let Some((_, p)) = params.iter().find(|(_, p)| !p.grad.all_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * g[i];
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                *w -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = params.iter().map(|(_, p)| p.grad.data().iter().map(|g| g * g).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store(3.0);
        let mut adam = Adam::new(&s);
        for _ in 0..5 {
            adam.step(&mut s, 0.1).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().1.value.data(), [3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store(0.0);
        s.iter_mut().next().unwrap().grad = Tensor::scalar(1.0);
        let mut adam = Adam::new(&s);
        adam.step(&mut s, 0.1).unwrap();
        let w = s.iter().next().unwrap().1.value.data()[0];
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        assert!((w + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_names_parameter_and_changes_nothing() {
        let mut s = store(1.0);
        s.insert("other", Tensor::scalar(2.0));
        s.iter_mut().nth(1).unwrap().grad = Tensor::scalar(f64::NAN);
        let mut adam = Adam::new(&s);
        match adam.step(&mut s, 0.1) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "other"),
            other => panic!("{other:?}"),
        }
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut s = store(0.0);
        s.iter_mut().next().unwrap().grad = Tensor::scalar(-10.0);
        assert_eq!(clip_grad_norm(&mut s, 2.0), 10.0);
        assert_eq!(s.iter().next().unwrap().1.grad.data(), [-2.0]);
    }
}
