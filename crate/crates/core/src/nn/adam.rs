use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::real::Real;

/// Bias-corrected Adam with the usual (0.9, 0.999, 1e-8) constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(num_params: usize, lr: T) -> Self {
        Self {
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            step: 0,
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[T] {
        &self.m
    }

    pub fn second_moment(&self) -> &[T] {
        &self.v
    }

    /// Applies one update in place. Non-finite gradients leave both the
    /// parameters and the optimizer state untouched.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        ensure_dim("adam params", self.m.len(), params.len())?;
        ensure_dim("adam grads", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
