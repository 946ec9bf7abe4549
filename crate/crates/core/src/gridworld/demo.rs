use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DoorKey, GridAction, GridError, GridState, StateKey};
use crate::srm::Trajectory;

/// Breadth-first search for a shortest action sequence from `start` to the
/// goal.
pub fn plan(env: &DoorKey, start: &GridState) -> Result<Vec<GridAction>, GridError> {
    let mut root = start.clone();
    root.t = 0;
    let mut parent: HashMap<StateKey, (StateKey, GridAction)> = HashMap::new();
    let mut seen = HashSet::from([StateKey::from(&root)]);
    let mut queue = VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        for a in GridAction::ALL {
            let mut cur = s.clone();
            cur.t = 0;
            let out = env.step(&cur, a)?;
            let key = StateKey::from(&out.next);
            if !seen.insert(key) {
                continue;
            }
            parent.insert(key, (StateKey::from(&s), a));
            if out.reward > 0.0 || out.events.contains(super::REACH_GOAL) {
                let mut actions = vec![a];
                let mut k = StateKey::from(&s);
                let origin = StateKey::from(start);
                while k != origin {
                    let (p, a) = parent[&k];
                    actions.push(a);
                    k = p;
                }
                actions.reverse();
                return Ok(actions);
            }
            let mut next = out.next;
            next.done = false;
            queue.push_back(next);
        }
    }
    Err(GridError::PlanFailure)
}

/// Expert trajectories: shortest plans on `n` distinct layouts drawn from
/// `seed`.
pub fn demonstrate(
    env: &DoorKey,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory<GridState>>, GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: HashSet<StateKey> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        let s0 = env.reset(rng.random());
        attempts += 1;
        if !starts.insert(StateKey::from(&s0)) && attempts < 100 * n {
            continue;
        }
        let actions = plan(env, &s0)?;
        let mut tau = Trajectory::default();
        let mut s = s0;
        for a in actions {
            let o = env.step(&s, a)?;
            tau.push(s, a.index(), o.events);
            s = o.next;
        }
        out.push(tau);
    }
    Ok(out)
}
