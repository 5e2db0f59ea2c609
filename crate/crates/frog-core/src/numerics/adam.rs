//! Adam with bias correction, applied in place over a [`ParamSet`].

use super::{real, ParamSet, Real, Tensor};
use crate::error::{Error, Result};

/// Optimizer state: one pair of moment tensors per parameter, aligned with
/// the parameter set's order, plus the shared step count.
pub struct Adam<T: Real> {
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            beta1: real(beta1),
            beta2: real(beta2),
            epsilon: real(epsilon),
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update using the gradients stored in `params`. Moment buffers are
    /// allocated on first use and must keep matching shapes afterwards.
    pub fn step(&mut self, params: &mut ParamSet<T>, lr: T) -> Result<()> {
        assert!(lr >= T::zero(), "learning rate must be non-negative");
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step".into(),
                expected: format!("{} parameters", self.first.len()),
                got: format!("{}", params.len()),
            });
        }
        self.steps += 1;
        let t = self.steps as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if p.value.shape() != m.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step".into(),
                    expected: format!("{:?} for {}", m.shape(), p.id),
                    got: format!("{:?}", p.value.shape()),
                });
            }
            let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
            for ((x, g), (mi, vi)) in p
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(p.grad.as_slice())
                .zip(ms.iter_mut().zip(vs.iter_mut()))
            {
                let g = *g;
                *mi = self.beta1 * *mi + (one - self.beta1) * g;
                *vi = self.beta2 * *vi + (one - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x = *x - lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
