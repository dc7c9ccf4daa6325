//! Adam first-order optimizer over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults follow the usual recommendation:
/// step size 0.001, decay rates 0.9 / 0.999, epsilon 1e-8 added outside the
/// square root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adam step size must be > 0, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig(format!(
                "adam decay rates must lie in [0, 1), got β₁={}, β₂={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adam epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Optimizer state: step count plus exponential moving averages of the
/// gradient and the squared gradient, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    hyper: AdamHyper,
    step_count: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(Adam {
            hyper,
            step_count: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        })
    }

    pub fn hyper(&self) -> AdamHyper {
        self.hyper
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One Adam update:
    ///
    /// ```text
    /// m ← β₁ m + (1−β₁) g        m̂ = m / (1 − β₁ᵗ)
    /// v ← β₂ v + (1−β₂) g²       v̂ = v / (1 − β₂ᵗ)
    /// θ ← θ − α · m̂ / (√v̂ + ε)
    /// ```
    ///
    /// Rejects length mismatches and non-finite gradient entries before
    /// touching any state, so a failed call leaves `self` and `params`
    /// unchanged.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer holds {} parameters, got params={} grad={}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.step_count += 1;
        let AdamHyper {
            alpha,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - beta2.powi(self.step_count as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= alpha * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
