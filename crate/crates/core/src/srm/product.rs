//! Synchronous product of an event-producing environment with a machine.

use thiserror::Error;

use super::engine::{advance_counters, select};
use super::{EvalError, EventSet, HoleAssignment, Srm, StateId, Trajectory};

/// Outcome of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvTransition<S> {
    pub next: S,
    pub reward: f64,
    pub done: bool,
    pub events: EventSet,
}

/// An environment whose transitions are labelled with event atoms.
pub trait EventEnv {
    type State: Clone;
    type Error: std::error::Error + Send + Sync + 'static;

    /// Every atom this environment can emit.
    fn vocabulary(&self) -> Vec<String>;

    /// Draws an initial state from `d0`.
    fn initial_state(&self, seed: u64) -> Result<Self::State, Self::Error>;

    fn transition(
        &self,
        state: &Self::State,
        action: usize,
    ) -> Result<EnvTransition<Self::State>, Self::Error>;
}

#[derive(Debug, Error)]
pub enum ProductError {
    #[error("machine references event `{0}` that the environment never emits")]
    UnknownEvent(String),
    #[error("per-step reward delivery is unavailable for machines with hindsight directives")]
    HindsightNotStreamable,
    #[error("the product episode is already done")]
    Done,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("environment: {0}")]
    Env(Box<dyn std::error::Error + Send + Sync>),
}

/// How machine rewards are handed to the agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardDelivery {
    /// Reward after every step. Refused for machines with hindsight.
    Streaming,
    /// Only the machine state is tracked; rewards are computed on the whole
    /// trajectory afterwards.
    Deferred,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductState<S> {
    pub prefix: Trajectory<S>,
    pub env_state: S,
    pub q: StateId,
    pub done: bool,
    counters: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductStep {
    pub env_reward: f64,
    /// `None` under deferred delivery.
    pub srm_reward: Option<f64>,
    pub done: bool,
    pub events: EventSet,
    pub dummy: bool,
}

pub struct SyncProduct<'a, E> {
    env: &'a E,
    srm: &'a Srm,
    h: HoleAssignment,
    delivery: RewardDelivery,
}

impl<'a, E: EventEnv> SyncProduct<'a, E> {
    pub fn new(
        env: &'a E,
        srm: &'a Srm,
        h: HoleAssignment,
        delivery: RewardDelivery,
    ) -> Result<Self, ProductError> {
        srm.check_dimension(h.values())?;
        let vocab = env.vocabulary();
        if let Some(e) = srm.events().iter().find(|e| !vocab.contains(e)) {
            return Err(ProductError::UnknownEvent(e.clone()));
        }
        if delivery == RewardDelivery::Streaming && srm.has_hindsight() {
            return Err(ProductError::HindsightNotStreamable);
        }
        Ok(Self {
            env,
            srm,
            h,
            delivery,
        })
    }

    pub fn reset(&self, seed: u64) -> Result<ProductState<E::State>, ProductError> {
        let env_state = self
            .env
            .initial_state(seed)
            .map_err(|e| ProductError::Env(Box::new(e)))?;
        Ok(ProductState {
            prefix: Trajectory::default(),
            env_state,
            q: self.srm.initial(),
            done: false,
            counters: vec![0; self.srm.counters().len()],
        })
    }

    /// Advances the environment, extracts the events and advances the
    /// machine on the extended trajectory. Reaching an accepting state ends
    /// the episode whatever the environment says.
    pub fn step(
        &self,
        mut ps: ProductState<E::State>,
        action: usize,
    ) -> Result<(ProductState<E::State>, ProductStep), ProductError> {
        if ps.done {
            return Err(ProductError::Done);
        }
        let out = self
            .env
            .transition(&ps.env_state, action)
            .map_err(|e| ProductError::Env(Box::new(e)))?;
        let mask = self.srm.event_mask(&out.events);
        let h = self.h.values();
        let sel = select(self.srm, ps.q, mask, &ps.counters, h)?;
        let (next_q, reward) = match sel.rule {
            Some(i) => {
                let rule = &self.srm.rules()[i];
                (
                    rule.to,
                    rule.reward.to_affine(&ps.counters, h.len())?.eval(h),
                )
            }
            None => (ps.q, 0.0),
        };
        advance_counters(self.srm, mask, &mut ps.counters);
        let state = std::mem::replace(&mut ps.env_state, out.next);
        ps.prefix.push(state, action, out.events.clone());
        ps.q = next_q;
        ps.done = out.done || self.srm.is_accepting(next_q);
        let srm_reward = match self.delivery {
            RewardDelivery::Streaming => Some(reward),
            RewardDelivery::Deferred => None,
        };
        let step = ProductStep {
            env_reward: out.reward,
            srm_reward,
            done: ps.done,
            events: out.events,
            dummy: sel.rule.is_none(),
        };
        Ok((ps, step))
    }
}

/// Probability of moving from `from` to `(next_env, next_q)` under `action`:
/// the environment's transition probability when `next_q` is the machine's
/// successor on the extended trajectory, 0 otherwise. Environments here are
/// deterministic, so the result is 0 or 1.
pub fn product_probability<E>(
    product: &SyncProduct<'_, E>,
    from: &ProductState<E::State>,
    action: usize,
    next_env: &E::State,
    next_q: StateId,
) -> Result<f64, ProductError>
where
    E: EventEnv,
    E::State: PartialEq,
{
    let (succ, _) = product.step(from.clone(), action)?;
    Ok(if succ.env_state == *next_env && succ.q == next_q {
        1.0
    } else {
        0.0
    })
}
