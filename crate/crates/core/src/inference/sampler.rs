//! Diagonal Gaussian over hole assignments, plus the dummy-reward offset.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraints::{penalty, LinearConstraintSet};
use crate::optim::{Adam, AdamConfig};
use crate::srm::HoleAssignment;

use super::InferenceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleSampler {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    /// Reward the surrogate assigns to dummy transitions, subtracted from
    /// every sampled reward before comparing with `f`.
    pub offset: f64,
}

/// One draw `h = μ + σ ⊙ z`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoleSample {
    pub h: HoleAssignment,
    pub z: Vec<f64>,
    pub log_density: f64,
}

impl HoleSampler {
    pub fn new(n_holes: usize) -> Self {
        Self {
            mean: vec![0.0; n_holes],
            log_var: vec![0.0; n_holes],
            offset: 0.0,
        }
    }

    pub fn n_holes(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| (0.5 * lv).exp()).collect()
    }

    pub fn log_density(&self, h: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_var)
            .zip(h)
            .map(|((m, lv), x)| -0.5 * ((2.0 * PI).ln() + lv + (x - m).powi(2) / lv.exp()))
            .sum()
    }

    /// Differential entropy of the Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_var
            .iter()
            .map(|lv| 0.5 * ((2.0 * PI).ln() + 1.0 + lv))
            .sum()
    }

    pub fn sample_holes<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<HoleSample> {
        let std = self.std();
        (0..k)
            .map(|_| {
                let z: Vec<f64> = (0..self.n_holes())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let h: Vec<f64> = self
                    .mean
                    .iter()
                    .zip(&std)
                    .zip(&z)
                    .map(|((m, s), z)| m + s * z)
                    .collect();
                let log_density = self.log_density(&h);
                HoleSample {
                    h: HoleAssignment::new(h),
                    z,
                    log_density,
                }
            })
            .collect()
    }

    /// The mode, which for a Gaussian is the mean.
    pub fn most_likely(&self) -> HoleAssignment {
        HoleAssignment::new(self.mean.clone())
    }
}

/// Gradient of an expectation over the sampler, split by parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerGrad {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    pub offset: f64,
}

/// Score-function estimate of `∇ E_q[g]` for the mean and log-variance:
/// `∇ log q(h) = (z/σ, (z² - 1)/2)`. With more than one sample a
/// leave-one-out baseline is subtracted, which keeps the estimate unbiased.
pub fn score_function_grad(
    sampler: &HoleSampler,
    samples: &[HoleSample],
    losses: &[f64],
) -> SamplerGrad {
    let n = sampler.n_holes();
    let k = samples.len();
    let std = sampler.std();
    let mut mean = vec![0.0; n];
    let mut log_var = vec![0.0; n];
    let total: f64 = losses.iter().sum();
    for (s, &g) in samples.iter().zip(losses) {
        let w = if k > 1 {
            (g - (total - g) / (k - 1) as f64) / k as f64
        } else {
            g
        };
        for i in 0..n {
            mean[i] += w * s.z[i] / std[i];
            log_var[i] += w * 0.5 * (s.z[i] * s.z[i] - 1.0);
        }
    }
    SamplerGrad {
        mean,
        log_var,
        offset: 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Samples per iteration.
    pub k: usize,
    /// Step size for the soft loss.
    pub beta: f64,
    /// Multiplier on the constraint step.
    pub eta: f64,
    /// Weight of the entropy bonus.
    pub entropy_coef: f64,
    pub init_log_var: f64,
    /// Lower bound on the log-variance.
    pub min_log_var: f64,
    /// Extra distance past a violated constraint boundary when projecting.
    pub margin: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k: 16,
            beta: 0.2,
            eta: 1e8,
            entropy_coef: 1e-2,
            init_log_var: 0.0,
            min_log_var: -8.0,
            margin: 1e-6,
        }
    }
}

/// Per-sample soft loss and its derivative with respect to the offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftLoss {
    pub value: f64,
    pub d_offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerStep {
    /// Relaxed constraint loss at the mean before the step.
    pub j_con: f64,
    /// Mean soft loss over the samples.
    pub j_soft: f64,
}

/// Adam on the soft loss plus the constraint step.
#[derive(Clone, Debug)]
pub struct SamplerOptimizer {
    pub config: SamplerConfig,
    adam: Adam,
}

impl SamplerOptimizer {
    pub fn new(config: SamplerConfig, n_holes: usize) -> Self {
        Self {
            adam: Adam::new(AdamConfig::with_lr(config.beta), 2 * n_holes + 1),
            config,
        }
    }

    /// One update. The soft loss is descended with Adam; the entropy bonus
    /// is added to the log-variance gradient. Then every violated row
    /// `a·μ + b > 0` pushes the mean along `-a` by
    /// `β η sigmoid(relu(u))`, the gradient step on the relaxed loss, but
    /// never further than the boundary plus `margin`. Rows are revisited
    /// until none is violated or 100 passes are done.
    pub fn update(
        &mut self,
        sampler: &mut HoleSampler,
        samples: &[HoleSample],
        losses: &[SoftLoss],
        constraint: Option<&LinearConstraintSet>,
    ) -> Result<SamplerStep, InferenceError> {
        let n = sampler.n_holes();
        if samples.is_empty() || samples.len() != losses.len() {
            return Err(InferenceError::DimensionMismatch {
                expected: samples.len(),
                got: losses.len(),
            });
        }
        let values: Vec<f64> = losses.iter().map(|l| l.value).collect();
        let mut grad = score_function_grad(sampler, samples, &values);
        grad.offset = losses.iter().map(|l| l.d_offset).sum::<f64>() / losses.len() as f64;
        for g in &mut grad.log_var {
            *g -= self.config.entropy_coef * 0.5;
        }
        let mut flat = Vec::with_capacity(2 * n + 1);
        flat.extend(&grad.mean);
        flat.extend(&grad.log_var);
        flat.push(grad.offset);
        if flat.iter().any(|g| !g.is_finite()) {
            return Err(InferenceError::NonFiniteGradient("sampler"));
        }
        let mut params = Vec::with_capacity(2 * n + 1);
        params.extend(&sampler.mean);
        params.extend(&sampler.log_var);
        params.push(sampler.offset);
        self.adam.step(&mut params, &flat);
        sampler.mean.copy_from_slice(&params[..n]);
        sampler.log_var.copy_from_slice(&params[n..2 * n]);
        sampler.offset = params[2 * n];
        for lv in &mut sampler.log_var {
            *lv = lv.max(self.config.min_log_var);
        }

        let mut j_con = 0.0;
        if let Some(lcs) = constraint {
            j_con = penalty(lcs, &sampler.most_likely()).0;
            project(
                lcs,
                &mut sampler.mean,
                self.config.beta * self.config.eta,
                self.config.margin,
            );
        }
        Ok(SamplerStep {
            j_con,
            j_soft: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

/// Truncated constraint steps on `mean`, see [`SamplerOptimizer::update`].
pub fn project(lcs: &LinearConstraintSet, mean: &mut [f64], step: f64, margin: f64) {
    for _ in 0..100 {
        let mut moved = false;
        for row in &lcs.rows {
            let u = row.residual(mean);
            if u <= 0.0 {
                continue;
            }
            let norm2: f64 = row.coeffs.iter().map(|a| a * a).sum();
            if norm2 == 0.0 {
                continue;
            }
            let s = 1.0 / (1.0 + (-u).exp());
            let t = (step * s).min((u + margin) / norm2);
            for (m, a) in mean.iter_mut().zip(&row.coeffs) {
                *m -= t * a;
            }
            moved = true;
        }
        if !moved {
            break;
        }
    }
}
