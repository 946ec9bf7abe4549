//! Adam, dense and lazy-sparse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Minimizes: every step moves against the gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Grows the moment buffers to `n` parameters.
    pub fn resize(&mut self, n: usize) {
        if n > self.m.len() {
            self.m.resize(n, 0.0);
            self.v.resize(n, 0.0);
        }
    }

    fn update(&mut self, i: usize, g: f64, bc1: f64, bc2: f64) -> f64 {
        let c = self.config;
        self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
        self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
        let mh = self.m[i] / bc1;
        let vh = self.v[i] / bc2;
        c.lr * mh / (vh.sqrt() + c.eps)
    }

    fn tick(&mut self) -> (f64, f64) {
        self.t += 1;
        let t = self.t as i32;
        (
            1.0 - self.config.beta1.powi(t),
            1.0 - self.config.beta2.powi(t),
        )
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        self.resize(params.len());
        let (bc1, bc2) = self.tick();
        for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
            *p -= self.update(i, g, bc1, bc2);
        }
    }

    /// Updates only the listed coordinates; the moments of the others are
    /// left untouched.
    pub fn step_sparse(&mut self, params: &mut [f64], grad: &BTreeMap<usize, f64>) {
        if let Some((&last, _)) = grad.last_key_value() {
            self.resize(last + 1);
        }
        let (bc1, bc2) = self.tick();
        for (&i, &g) in grad {
            params[i] -= self.update(i, g, bc1, bc2);
        }
    }
}
