//! Bias-corrected Adam over groups of parameter arrays.

use crate::error::{Error, Result};
use crate::tensor::{real, Real};

/// Optimizer state: per-parameter moment accumulators and a step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    /// Fresh state for parameter arrays of the given lengths.
    pub fn new(lr: f64, lens: &[usize]) -> Self {
        AdamState {
            lr: real(lr),
            beta1: real(0.9),
            beta2: real(0.999),
            eps: real(1e-8),
            step: 0,
            m: lens.iter().map(|&l| vec![F::zero(); l]).collect(),
            v: lens.iter().map(|&l| vec![F::zero(); l]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update; `params[i]` and `grads[i]` must match the lengths the
    /// state was built with. Deterministic: identical inputs and state
    /// produce bitwise identical outputs.
    pub fn step(&mut self, params: &mut [&mut [F]], grads: &[&[F]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "expected {} parameter groups, got {} params / {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        for ((p, g), l) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != l.len() || g.len() != l.len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("group length {} vs state {}", p.len(), l.len()),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = F::one() - self.beta1.powi(t);
        let bc2 = F::one() - self.beta2.powi(t);
        for k in 0..self.m.len() {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            let p = &mut *params[k];
            let g = grads[k];
            for i in 0..m.len() {
                m[i] = self.beta1 * m[i] + (F::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (F::one() - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] = p[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
