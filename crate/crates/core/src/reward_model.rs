//! Surrogate reward `f(s, a)`: a per-state log-softmax table.
//!
//! `f` plays two roles. Shifted by noise it defines the discriminator
//! `D_ε(s,a) = exp(f+ε) / (exp(f+ε) + π_A(a|s))`, and it is tied to the
//! machine's per-step rewards through a squared-error term.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::policy::{log_softmax, softmax, Policy};

/// Gradient over flattened table entries.
pub type SparseGrad = BTreeMap<usize, f64>;

/// `dst += k * src`.
pub fn axpy(dst: &mut SparseGrad, k: f64, src: &SparseGrad) {
    for (&i, &g) in src {
        *dst.entry(i).or_default() += k * g;
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// State-action pairs of one trajectory, as table indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pairs {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Pairs {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states
            .iter()
            .copied()
            .zip(self.actions.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    n_actions: usize,
    logits: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    state: usize,
    logits: Vec<f64>,
}

impl RewardModel {
    pub fn new(n_actions: usize) -> Self {
        Self {
            n_actions,
            logits: Vec::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.logits.len() / self.n_actions
    }

    pub fn ensure(&mut self, n_states: usize) {
        if n_states * self.n_actions > self.logits.len() {
            self.logits.resize(n_states * self.n_actions, 0.0);
        }
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn row(&self, s: usize) -> Vec<f64> {
        let lo = s * self.n_actions;
        if lo + self.n_actions <= self.logits.len() {
            self.logits[lo..lo + self.n_actions].to_vec()
        } else {
            vec![0.0; self.n_actions]
        }
    }

    /// `log softmax(logits[s])[a]`, always `<= 0`. Unseen states are uniform.
    pub fn f(&self, s: usize, a: usize) -> f64 {
        log_softmax(&self.row(s))[a]
    }

    /// Adds `k * ∂f(s,a)/∂logits` to `grad`.
    fn backprop(&self, s: usize, a: usize, k: f64, grad: &mut SparseGrad) {
        let p = softmax(&self.row(s));
        for (b, pb) in p.iter().enumerate() {
            let d = if b == a { 1.0 - pb } else { -pb };
            *grad.entry(s * self.n_actions + b).or_default() += k * d;
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in 0..self.n_states() {
            serde_json::to_writer(
                &mut w,
                &Row {
                    state: s,
                    logits: self.row(s),
                },
            )?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(n_actions: usize, r: R) -> std::io::Result<Self> {
        let mut m = Self::new(n_actions);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(std::io::Error::other)?;
            if row.logits.len() != n_actions {
                return Err(std::io::Error::other(format!(
                    "state {}: expected {n_actions} logits",
                    row.state
                )));
            }
            m.ensure(row.state + 1);
            m.logits[row.state * n_actions..(row.state + 1) * n_actions]
                .copy_from_slice(&row.logits);
        }
        Ok(m)
    }
}

/// `log π_A(a|s)`; states the policy has not seen are uniform.
pub fn policy_log_prob(policy: &Policy, s: usize, a: usize) -> f64 {
    if s < policy.n_states() {
        policy.log_probs(s)[a]
    } else {
        -(policy.n_actions() as f64).ln()
    }
}

/// `D_ε = σ(f + ε - log π_A)`.
pub fn discriminator(f: f64, eps: f64, log_pi_a: f64) -> f64 {
    sigmoid(f + eps - log_pi_a)
}

/// Noise for every trajectory: `draws[i][d]` is draw `d` of trajectory `i`,
/// shared by all its steps.
pub type NoiseDraws = Vec<Vec<f64>>;

/// Monte-Carlo estimate of `J_adv`: mean over expert trajectories of
/// `Σ_t log D_ε` plus mean over agent trajectories of `Σ_t log(1 - D_ε)`,
/// each averaged over the noise draws.
pub fn adv_objective(
    model: &RewardModel,
    expert: &[Pairs],
    agent: &[Pairs],
    policy: &Policy,
    expert_noise: &NoiseDraws,
    agent_noise: &NoiseDraws,
) -> f64 {
    let term = |pool: &[Pairs], noise: &NoiseDraws, expert: bool| {
        if pool.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for (tau, draws) in pool.iter().zip(noise) {
            for &eps in draws {
                for (s, a) in tau.iter() {
                    let x = model.f(s, a) + eps - policy_log_prob(policy, s, a);
                    total += if expert { -softplus(-x) } else { -softplus(x) } / draws.len() as f64;
                }
            }
        }
        total / pool.len() as f64
    };
    term(expert, expert_noise, true) + term(agent, agent_noise, false)
}

/// Gradient of [`adv_objective`] with respect to the logits: `1 - D` per
/// expert pair and `-D` per agent pair, pushed through the log-softmax.
pub fn adv_grad(
    model: &RewardModel,
    expert: &[Pairs],
    agent: &[Pairs],
    policy: &Policy,
    expert_noise: &NoiseDraws,
    agent_noise: &NoiseDraws,
) -> SparseGrad {
    let mut grad = SparseGrad::new();
    for (pool, noise, is_expert) in [(expert, expert_noise, true), (agent, agent_noise, false)] {
        if pool.is_empty() {
            continue;
        }
        let w_tau = 1.0 / pool.len() as f64;
        for (tau, draws) in pool.iter().zip(noise) {
            let w = w_tau / draws.len() as f64;
            for (s, a) in tau.iter() {
                let base = model.f(s, a) - policy_log_prob(policy, s, a);
                let mut k = 0.0;
                for &eps in draws {
                    let d = sigmoid(base + eps);
                    k += if is_expert { 1.0 - d } else { -d };
                }
                model.backprop(s, a, w * k, &mut grad);
            }
        }
    }
    grad
}

/// `Σ_τ Σ_t ½ (f(τ[t]) - (l_t - b))²`.
pub fn kl_loss(model: &RewardModel, trajectories: &[Pairs], targets: &[Vec<f64>], b: f64) -> f64 {
    let mut total = 0.0;
    for (tau, l) in trajectories.iter().zip(targets) {
        for ((s, a), &lt) in tau.iter().zip(l) {
            let r = model.f(s, a) - (lt - b);
            total += 0.5 * r * r;
        }
    }
    total
}

/// Gradient of [`kl_loss`] with respect to the logits.
pub fn kl_grad(
    model: &RewardModel,
    trajectories: &[Pairs],
    targets: &[Vec<f64>],
    b: f64,
) -> SparseGrad {
    let mut grad = SparseGrad::new();
    for (tau, l) in trajectories.iter().zip(targets) {
        for ((s, a), &lt) in tau.iter().zip(l) {
            let r = model.f(s, a) - (lt - b);
            model.backprop(s, a, r, &mut grad);
        }
    }
    grad
}
