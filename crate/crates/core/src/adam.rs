//! Bias-corrected Adam over named parameter blocks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::real::Real;

/// One parameter block handed to [`Adam::step`]: name, values, gradient.
pub struct Block<'a, T> {
    pub name: &'a str,
    pub param: &'a mut [T],
    pub grad: &'a [T],
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(block_lens: &[usize]) -> Self {
        Self::with_moments(block_lens, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(block_lens: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: block_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: block_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Gradients are validated before any parameter is
    /// touched, so a failed step leaves parameters and moments unchanged.
    pub fn step(&mut self, lr: f64, blocks: &mut [Block<'_, T>]) -> Result<()> {
        if blocks.len() != self.first.len() {
            return Err(Error::Shape {
                op: "adam_step blocks",
                expected: self.first.len(),
                got: blocks.len(),
            });
        }
        for (b, m) in blocks.iter().zip(&self.first) {
            if b.param.len() != m.len() || b.grad.len() != m.len() {
                return Err(Error::Shape {
                    op: "adam_step",
                    expected: m.len(),
                    got: b.grad.len(),
                });
            }
            if !b.grad.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFinite(String::from("gradient of ") + b.name));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - Float::powi(self.beta1, t));
        let c2 = T::of(1.0 - Float::powi(self.beta2, t));
        let eps = T::of(self.eps);
        let lr = T::of(lr);
        for ((b, m), v) in blocks.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..m.len() {
                let g = b.grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                b.param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
