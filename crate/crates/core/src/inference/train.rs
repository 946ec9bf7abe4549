//! Rollouts, the PPO loop for fixed rewards, and the full inference loop.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constraints::{compile, satisfied, LinearConstraintSet};
use crate::gridworld::{DoorKey, GridState, StateIndexer};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{Episode, PpoLearner, RolloutBatch};
use crate::reward_model::{adv_grad, adv_objective, axpy, kl_grad, Pairs, RewardModel, SparseGrad};
use crate::srm::{
    partial_evaluate, run, HoleAssignment, RewardDelivery, Srm, SyncProduct, Trajectory,
};

use super::{
    j_soft_value, HoleSampler, InferenceError, PreparedTrajectory, RolloutConfig, SamplerOptimizer,
    TrainConfig,
};

pub const CSV_HEADER: &str = "iter,frames,avg_return,j_adv,j_soft,j_con,max_residual";

/// Progress after one iteration. Objective fields are `None` for plain PPO.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iter: usize,
    /// Environment steps consumed so far.
    pub frames: usize,
    /// Rolling mean of environment returns.
    pub avg_return: f64,
    /// Mean machine return of this iteration's episodes under the rewards
    /// the agent was trained on.
    pub train_return: f64,
    pub j_adv: Option<f64>,
    pub j_soft: Option<f64>,
    pub j_con: Option<f64>,
    /// Constraint residuals at the sampler mean.
    pub residuals: Vec<f64>,
    pub max_residual: Option<f64>,
    /// Sampler mean after the iteration, empty for plain PPO.
    pub mean: Vec<f64>,
    pub offset: Option<f64>,
}

impl IterationReport {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.iter,
            self.frames,
            self.avg_return,
            opt(self.j_adv),
            opt(self.j_soft),
            opt(self.j_con),
            opt(self.max_residual)
        )
    }
}

/// Rolling mean of episode returns, remembering when it first reached the
/// target with a full window.
#[derive(Clone, Debug)]
pub struct ReturnTracker {
    window: VecDeque<f64>,
    cap: usize,
    target: f64,
    pub frames_to_target: Option<usize>,
}

impl ReturnTracker {
    pub fn new(cap: usize, target: f64) -> Self {
        Self {
            window: VecDeque::with_capacity(cap),
            cap,
            target,
            frames_to_target: None,
        }
    }

    /// Records an episode that ended after `frames` total environment steps.
    pub fn push(&mut self, ret: f64, frames: usize) {
        if self.window.len() == self.cap {
            self.window.pop_front();
        }
        self.window.push_back(ret);
        if self.frames_to_target.is_none()
            && self.window.len() == self.cap
            && self.mean() >= self.target
        {
            self.frames_to_target = Some(frames);
        }
    }

    pub fn mean(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }
}

/// Where the agent's rewards come from.
#[derive(Clone, Debug)]
pub enum RewardSource<'a> {
    /// The environment's own sparse reward.
    Default,
    /// A machine concretized with `h`, evaluated on each finished episode.
    Srm { srm: &'a Srm, h: HoleAssignment },
}

#[derive(Clone, Debug, Default)]
pub struct Rollouts {
    pub trajectories: Vec<Trajectory<GridState>>,
    pub episodes: Vec<Episode>,
    pub env_returns: Vec<f64>,
    /// Frames of each episode.
    pub lengths: Vec<usize>,
}

impl Rollouts {
    pub fn frames(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Runs the current policy until at least `rollout.episodes` complete
/// episodes and `rollout.batch_size` frames have been collected. Episode
/// layouts come from consecutive values of `next_seed`.
pub fn collect<R: Rng + ?Sized>(
    env: &DoorKey,
    source: &RewardSource<'_>,
    learner: &PpoLearner,
    indexer: &mut StateIndexer,
    rollout: &RolloutConfig,
    next_seed: &mut u64,
    rng: &mut R,
) -> Result<Rollouts, InferenceError> {
    let product = match source {
        RewardSource::Srm { srm, h } => Some(SyncProduct::new(
            env,
            srm,
            h.clone(),
            RewardDelivery::Deferred,
        )?),
        RewardSource::Default => None,
    };
    let mut out = Rollouts::default();
    let mut frames = 0;
    while out.episodes.len() < rollout.episodes || frames < rollout.batch_size {
        let seed = *next_seed;
        *next_seed = next_seed.wrapping_add(1);
        let mut ep = Episode::default();
        let mut ret = 0.0;
        let mut tau = Trajectory::default();
        match &product {
            Some(product) => {
                let mut ps = product.reset(seed)?;
                loop {
                    let (s, a, lp, v) = act(learner, indexer, &ps.env_state, rng);
                    ep.states.push(s);
                    ep.actions.push(a);
                    ep.log_probs.push(lp);
                    ep.values.push(v);
                    let (next, step) = product.step(ps, a)?;
                    ps = next;
                    ret += step.env_reward;
                    if step.done {
                        break;
                    }
                }
                tau = ps.prefix;
                if let RewardSource::Srm { srm, h } = source {
                    ep.rewards = run(srm, &tau, h)?.rewards;
                }
            }
            None => {
                let mut state = env.reset(seed);
                loop {
                    let (s, a, lp, v) = act(learner, indexer, &state, rng);
                    ep.states.push(s);
                    ep.actions.push(a);
                    ep.log_probs.push(lp);
                    ep.values.push(v);
                    let o = env.step(
                        &state,
                        crate::gridworld::GridAction::from_index(a).expect("sampled action"),
                    )?;
                    ep.rewards.push(o.reward);
                    ret += o.reward;
                    tau.push(std::mem::replace(&mut state, o.next), a, o.events);
                    if o.done {
                        break;
                    }
                }
            }
        }
        frames += ep.len();
        out.lengths.push(ep.len());
        out.env_returns.push(ret);
        out.episodes.push(ep);
        out.trajectories.push(tau);
    }
    Ok(out)
}

fn act<R: Rng + ?Sized>(
    learner: &PpoLearner,
    indexer: &mut StateIndexer,
    state: &GridState,
    rng: &mut R,
) -> (usize, usize, f64, f64) {
    let s = indexer.index(state);
    if s < learner.policy.n_states() {
        let (a, lp) = learner.policy.sample(s, rng);
        (s, a, lp, learner.policy.value(s))
    } else {
        // Unseen state: the table row would be all zeros.
        let n = learner.policy.n_actions();
        (s, rng.random_range(0..n), -(n as f64).ln(), 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub learner: PpoLearner,
    pub indexer: StateIndexer,
    /// Present after the inference loop.
    pub sampler: Option<HoleSampler>,
    pub model: Option<RewardModel>,
    pub reports: Vec<IterationReport>,
    pub frames: usize,
    /// Frames used when the rolling return first reached the target.
    pub frames_to_target: Option<usize>,
}

fn episode_seed_base(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn finished(config: &TrainConfig, iter: usize, frames: usize, tracker: &ReturnTracker) -> bool {
    iter >= config.iterations
        || (config.max_frames > 0 && frames >= config.max_frames)
        || (config.stop_at_target && tracker.frames_to_target.is_some())
}

/// PPO on a fixed reward source.
pub fn train_ppo(
    env: &DoorKey,
    source: RewardSource<'_>,
    config: &TrainConfig,
    mut on_report: impl FnMut(&IterationReport),
) -> Result<TrainOutcome, InferenceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut next_seed = episode_seed_base(config.seed);
    let mut learner = PpoLearner::new(crate::gridworld::GridAction::COUNT, config.ppo.clone());
    let mut indexer = StateIndexer::new();
    let mut tracker = ReturnTracker::new(config.return_window, config.target_return);
    let mut frames = 0;
    let mut reports = Vec::new();
    let mut iter = 0;
    while !finished(config, iter, frames, &tracker) {
        let roll = collect(
            env,
            &source,
            &learner,
            &mut indexer,
            &config.rollout,
            &mut next_seed,
            &mut rng,
        )?;
        for (ret, len) in roll.env_returns.iter().zip(&roll.lengths) {
            frames += len;
            tracker.push(*ret, frames);
        }
        let train_return = mean(roll.episodes.iter().map(|e| e.rewards.iter().sum::<f64>()));
        let batch = RolloutBatch {
            episodes: roll.episodes,
            gamma: config.rollout.gamma,
            lambda: config.rollout.lambda,
        };
        learner.update(&batch, &mut rng)?;
        let report = IterationReport {
            iter,
            frames,
            avg_return: tracker.mean(),
            train_return,
            j_adv: None,
            j_soft: None,
            j_con: None,
            residuals: Vec::new(),
            max_residual: None,
            mean: Vec::new(),
            offset: None,
        };
        on_report(&report);
        reports.push(report);
        iter += 1;
    }
    Ok(TrainOutcome {
        learner,
        indexer,
        sampler: None,
        model: None,
        reports,
        frames,
        frames_to_target: tracker.frames_to_target,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn pairs(indexer: &mut StateIndexer, tau: &Trajectory<GridState>) -> Pairs {
    Pairs {
        states: tau.steps.iter().map(|s| indexer.index(&s.state)).collect(),
        actions: tau.steps.iter().map(|s| s.action).collect(),
    }
}

fn noise<R: Rng + ?Sized>(n: usize, draws: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..draws).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Mean over `samples` of the machine's per-step rewards on each trajectory.
fn mean_rewards(
    srm: &Srm,
    partials: &[crate::srm::PartialRun],
    samples: &[HoleAssignment],
) -> Result<Vec<Vec<f64>>, InferenceError> {
    let mut out = Vec::with_capacity(partials.len());
    for p in partials {
        let mut acc = vec![0.0; p.len()];
        for h in samples {
            for (a, r) in acc.iter_mut().zip(p.rewards(srm, h)?) {
                *a += r;
            }
        }
        acc.iter_mut().for_each(|a| *a /= samples.len() as f64);
        out.push(acc);
    }
    Ok(out)
}

fn prepare(
    model: &RewardModel,
    partials: &[crate::srm::PartialRun],
    pairs: &[Pairs],
) -> Vec<PreparedTrajectory> {
    partials
        .iter()
        .zip(pairs)
        .map(|(p, tau)| PreparedTrajectory {
            partial: p.clone(),
            f: tau
                .states
                .iter()
                .zip(&tau.actions)
                .map(|(&s, &a)| model.f(s, a))
                .collect(),
        })
        .collect()
}

/// The inference loop. Each iteration collects episodes rewarded by the
/// machine at the sampler mean, updates the policy with PPO, updates the
/// surrogate reward (ascending the adversarial objective, descending the
/// squared error to the sampled machines' rewards) and then the sampler.
/// The constraint used is the machine's own; pass a machine with an empty
/// constraint to train without one.
pub fn algorithm1(
    srm: &Srm,
    env: &DoorKey,
    demos: &[Trajectory<GridState>],
    config: &TrainConfig,
    mut on_report: impl FnMut(&IterationReport),
) -> Result<TrainOutcome, InferenceError> {
    if demos.is_empty() {
        return Err(InferenceError::NoDemonstrations);
    }
    config.check()?;
    let lcs: Option<LinearConstraintSet> = if srm.constraint().is_empty() {
        None
    } else {
        Some(compile(srm.constraint(), srm.n_holes())?)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut next_seed = episode_seed_base(config.seed);
    let mut learner = PpoLearner::new(crate::gridworld::GridAction::COUNT, config.ppo.clone());
    let mut indexer = StateIndexer::new();
    let mut model = RewardModel::new(crate::gridworld::GridAction::COUNT);
    let mut model_opt = Adam::new(AdamConfig::with_lr(config.reward_model.alpha), 0);
    let mut sampler = HoleSampler::new(srm.n_holes());
    sampler
        .log_var
        .iter_mut()
        .for_each(|lv| *lv = config.sampler.init_log_var);
    // The untrained surrogate is uniform, f = -ln |A| everywhere; starting
    // the offset there makes the all-zero machine match it exactly.
    sampler.offset = (crate::gridworld::GridAction::COUNT as f64).ln();
    let mut sampler_opt = SamplerOptimizer::new(config.sampler, srm.n_holes());
    let mut tracker = ReturnTracker::new(config.return_window, config.target_return);

    let expert_pairs: Vec<Pairs> = demos.iter().map(|t| pairs(&mut indexer, t)).collect();
    let expert_partials = demos
        .iter()
        .map(|t| partial_evaluate(srm, t))
        .collect::<Result<Vec<_>, _>>()?;

    let draws = config.reward_model.noise_draws;
    let mut frames = 0;
    let mut reports = Vec::new();
    let mut iter = 0;
    while !finished(config, iter, frames, &tracker) {
        // Rollouts rewarded by the most likely machine, then PPO.
        let source = RewardSource::Srm {
            srm,
            h: sampler.most_likely(),
        };
        let roll = collect(
            env,
            &source,
            &learner,
            &mut indexer,
            &config.rollout,
            &mut next_seed,
            &mut rng,
        )?;
        for (ret, len) in roll.env_returns.iter().zip(&roll.lengths) {
            frames += len;
            tracker.push(*ret, frames);
        }
        let agent_pairs: Vec<Pairs> = roll
            .episodes
            .iter()
            .map(|e| Pairs {
                states: e.states.clone(),
                actions: e.actions.clone(),
            })
            .collect();
        let train_return = mean(roll.episodes.iter().map(|e| e.rewards.iter().sum::<f64>()));
        let batch = RolloutBatch {
            episodes: roll.episodes,
            gamma: config.rollout.gamma,
            lambda: config.rollout.lambda,
        };
        learner.update(&batch, &mut rng)?;
        learner.policy.ensure(indexer.len());
        model.ensure(indexer.len());

        let agent_partials = roll
            .trajectories
            .iter()
            .map(|t| partial_evaluate(srm, t))
            .collect::<Result<Vec<_>, _>>()?;
        let (mut j_adv, mut j_soft, mut j_con) = (0.0, 0.0, 0.0);
        for _ in 0..config.inner_steps {
            // Hole samples and their rewards on every trajectory.
            let samples = sampler.sample_holes(config.sampler.k, &mut rng);
            let hs: Vec<HoleAssignment> = samples.iter().map(|s| s.h.clone()).collect();

            // Surrogate reward.
            let expert_noise = noise(expert_pairs.len(), draws, &mut rng);
            let agent_noise = noise(agent_pairs.len(), draws, &mut rng);
            j_adv = adv_objective(
                &model,
                &expert_pairs,
                &agent_pairs,
                &learner.policy,
                &expert_noise,
                &agent_noise,
            );
            let mut grad = SparseGrad::new();
            axpy(
                &mut grad,
                -1.0,
                &adv_grad(
                    &model,
                    &expert_pairs,
                    &agent_pairs,
                    &learner.policy,
                    &expert_noise,
                    &agent_noise,
                ),
            );
            let agent_targets = mean_rewards(srm, &agent_partials, &hs)?;
            let expert_targets = mean_rewards(srm, &expert_partials, &hs)?;
            let kw = config.reward_model.kl_weight;
            let b = sampler.offset;
            axpy(
                &mut grad,
                kw * 0.5 / agent_pairs.len() as f64,
                &kl_grad(&model, &agent_pairs, &agent_targets, b),
            );
            axpy(
                &mut grad,
                kw * 0.5 / expert_pairs.len() as f64,
                &kl_grad(&model, &expert_pairs, &expert_targets, b),
            );
            if grad.values().any(|g| !g.is_finite()) {
                return Err(InferenceError::NonFiniteGradient("reward model"));
            }
            model_opt.step_sparse(model.logits_mut(), &grad);

            // Sampler.
            let agent_prep = prepare(&model, &agent_partials, &agent_pairs);
            let expert_prep = prepare(&model, &expert_partials, &expert_pairs);
            let losses = j_soft_value(srm, &hs, &agent_prep, &expert_prep, sampler.offset)?;
            let step = sampler_opt.update(&mut sampler, &samples, &losses, lcs.as_ref())?;
            j_soft = step.j_soft;
            j_con = step.j_con;
        }

        let residuals = lcs
            .as_ref()
            .map(|l| satisfied(l, &sampler.most_likely()).residuals)
            .unwrap_or_default();
        let max_residual = lcs
            .as_ref()
            .map(|_| residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let report = IterationReport {
            iter,
            frames,
            avg_return: tracker.mean(),
            train_return,
            j_adv: Some(j_adv),
            j_soft: Some(j_soft),
            j_con: Some(j_con),
            residuals,
            max_residual,
            mean: sampler.mean.clone(),
            offset: Some(sampler.offset),
        };
        on_report(&report);
        reports.push(report);
        iter += 1;
    }
    Ok(TrainOutcome {
        learner,
        indexer,
        sampler: Some(sampler),
        model: Some(model),
        reports,
        frames,
        frames_to_target: tracker.frames_to_target,
    })
}
