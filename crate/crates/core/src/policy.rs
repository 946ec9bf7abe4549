//! Tabular softmax actor-critic trained with a clipped-surrogate update.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{Adam, AdamConfig};

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log softmax(logits)[a]` for every `a`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n_actions: usize,
    /// Row-major `states × actions`.
    logits: Vec<f64>,
    value: Vec<f64>,
}

impl Policy {
    pub fn new(n_actions: usize) -> Self {
        Self {
            n_actions,
            logits: Vec::new(),
            value: Vec::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.value.len()
    }

    /// Grows the tables; new states start uniform with value 0.
    pub fn ensure(&mut self, n_states: usize) {
        if n_states > self.value.len() {
            self.value.resize(n_states, 0.0);
            self.logits.resize(n_states * self.n_actions, 0.0);
        }
    }

    pub fn logits(&self, s: usize) -> &[f64] {
        &self.logits[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn logits_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.logits[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn action_probs(&self, s: usize) -> Vec<f64> {
        softmax(self.logits(s))
    }

    pub fn log_probs(&self, s: usize) -> Vec<f64> {
        log_softmax(self.logits(s))
    }

    pub fn value(&self, s: usize) -> f64 {
        self.value[s]
    }

    /// Draws an action, returning it with its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (usize, f64) {
        let lp = self.log_probs(s);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return (a, *l);
            }
        }
        let a = self.n_actions - 1;
        (a, lp[a])
    }

    pub fn greedy(&self, s: usize) -> usize {
        let row = self.logits(s);
        (0..self.n_actions).fold(0, |best, a| if row[a] > row[best] { a } else { best })
    }

    pub fn mean_abs_logit(&self) -> f64 {
        if self.logits.is_empty() {
            return 0.0;
        }
        self.logits.iter().map(|z| z.abs()).sum::<f64>() / self.logits.len() as f64
    }
}

/// One collected episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Episode {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Log-probability of the action at collection time.
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
    pub gamma: f64,
    pub lambda: f64,
}

impl RolloutBatch {
    pub fn frames(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }
}

/// Generalized advantage estimates and returns for complete episodes. The
/// value after the last step is 0.
pub fn gae(batch: &RolloutBatch) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut advs = Vec::with_capacity(batch.episodes.len());
    let mut rets = Vec::with_capacity(batch.episodes.len());
    for ep in &batch.episodes {
        let n = ep.len();
        let mut adv = vec![0.0; n];
        let mut acc = 0.0;
        for t in (0..n).rev() {
            let next_v = if t + 1 < n { ep.values[t + 1] } else { 0.0 };
            let delta = ep.rewards[t] + batch.gamma * next_v - ep.values[t];
            acc = delta + batch.gamma * batch.lambda * acc;
            adv[t] = acc;
        }
        let ret = adv.iter().zip(&ep.values).map(|(a, v)| a + v).collect();
        advs.push(adv);
        rets.push(ret);
    }
    (advs, rets)
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub policy_lr: f64,
    pub value_lr: f64,
    /// Abort when the mean absolute logit exceeds this.
    pub max_mean_abs_logit: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 4,
            minibatches: 8,
            entropy_coef: 0.01,
            normalize_advantages: true,
            policy_lr: 0.05,
            value_lr: 0.05,
            max_mean_abs_logit: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy diverged: mean |logit| = {0}")]
    Divergence(f64),
    #[error("empty rollout batch")]
    EmptyBatch,
}

/// A policy with its optimizer state.
#[derive(Clone, Debug)]
pub struct PpoLearner {
    pub policy: Policy,
    pub config: PpoConfig,
    pi_opt: Adam,
    v_opt: Adam,
}

impl PpoLearner {
    pub fn new(n_actions: usize, config: PpoConfig) -> Self {
        Self {
            policy: Policy::new(n_actions),
            pi_opt: Adam::new(AdamConfig::with_lr(config.policy_lr), 0),
            v_opt: Adam::new(AdamConfig::with_lr(config.value_lr), 0),
            config,
        }
    }

    /// Clipped-surrogate update with entropy bonus and a squared-error value
    /// loss, `epochs × minibatches` optimizer steps.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &RolloutBatch,
        rng: &mut R,
    ) -> Result<PpoStats, PolicyError> {
        let (advs, rets) = gae(batch);
        let mut samples: Vec<(usize, usize, f64, f64, f64)> = Vec::with_capacity(batch.frames());
        for (e, ep) in batch.episodes.iter().enumerate() {
            for t in 0..ep.len() {
                samples.push((
                    ep.states[t],
                    ep.actions[t],
                    ep.log_probs[t],
                    advs[e][t],
                    rets[e][t],
                ));
            }
        }
        if samples.is_empty() {
            return Err(PolicyError::EmptyBatch);
        }
        if self.config.normalize_advantages && samples.len() > 1 {
            let n = samples.len() as f64;
            let mean = samples.iter().map(|s| s.3).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s.3 - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt() + 1e-8;
            for s in &mut samples {
                s.3 = (s.3 - mean) / std;
            }
        }
        let max_state = samples.iter().map(|s| s.0).max().unwrap_or(0);
        self.policy.ensure(max_state + 1);

        let na = self.policy.n_actions;
        let clip = self.config.clip;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let n_mb = self.config.minibatches.clamp(1, samples.len());
        let mut stats = PpoStats::default();
        let mut counted = 0usize;
        for _ in 0..self.config.epochs {
            shuffle(&mut order, rng);
            for chunk in 0..n_mb {
                let lo = chunk * samples.len() / n_mb;
                let hi = (chunk + 1) * samples.len() / n_mb;
                let mb = &order[lo..hi];
                let scale = 1.0 / mb.len() as f64;
                let mut g_pi: BTreeMap<usize, f64> = BTreeMap::new();
                let mut g_v: BTreeMap<usize, f64> = BTreeMap::new();
                for &i in mb {
                    let (s, a, old_lp, adv, ret) = samples[i];
                    let lp = self.policy.log_probs(s);
                    let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                    let ratio = (lp[a] - old_lp).exp();
                    let entropy = -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
                    let clipped_out =
                        (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
                    stats.loss +=
                        -clipped_surrogate(ratio, adv, clip) - self.config.entropy_coef * entropy;
                    stats.entropy += entropy;
                    if (ratio - 1.0).abs() > clip {
                        stats.clip_fraction += 1.0;
                    }
                    counted += 1;
                    for b in 0..na {
                        let onehot = if b == a { 1.0 } else { 0.0 };
                        let mut g = 0.0;
                        if !clipped_out {
                            g -= adv * ratio * (onehot - p[b]);
                        }
                        g += self.config.entropy_coef * p[b] * (lp[b] + entropy);
                        *g_pi.entry(s * na + b).or_default() += g * scale;
                    }
                    let v = self.policy.value[s];
                    *g_v.entry(s).or_default() += (v - ret) * scale;
                }
                self.pi_opt.step_sparse(&mut self.policy.logits, &g_pi);
                self.v_opt.step_sparse(&mut self.policy.value, &g_v);
            }
        }
        let mal = self.policy.mean_abs_logit();
        if !mal.is_finite() || mal > self.config.max_mean_abs_logit {
            return Err(PolicyError::Divergence(mal));
        }
        let n = counted.max(1) as f64;
        Ok(PpoStats {
            loss: stats.loss / n,
            entropy: stats.entropy / n,
            clip_fraction: stats.clip_fraction / n,
        })
    }
}

fn shuffle<R: Rng + ?Sized>(v: &mut [usize], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}
