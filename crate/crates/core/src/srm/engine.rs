use super::{EvalError, HindsightDirective, HoleAssignment, Srm, StateId, Trajectory};

/// Several guards held at once; the lowest priority number won.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapDiagnostic {
    pub t: usize,
    pub state: StateId,
    /// Enabled rules in resolution order; the first one fired.
    pub rules: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: StateId,
    pub reward: f64,
    pub dummy: bool,
    pub rule: Option<usize>,
    /// Non-empty when more than one rule was enabled.
    pub overlapping: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// Internal states `q0 .. qT`, one longer than `rewards`.
    pub path: Vec<StateId>,
    /// Per-step rewards after hindsight rewriting.
    pub rewards: Vec<f64>,
    pub total: f64,
    /// Steps where no rule was enabled.
    pub dummy_mask: Vec<bool>,
    /// Rule fired at each step, `None` for dummy transitions.
    pub fired: Vec<Option<usize>>,
    pub diagnostics: Vec<OverlapDiagnostic>,
}

pub(crate) fn total_of(rewards: &[f64]) -> f64 {
    rewards.iter().fold(0.0, |acc, r| acc + r)
}

/// Event masks and pre-step counter values of a trajectory. Both depend on
/// the events only, never on the machine state or the holes.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Trace {
    pub masks: Vec<u64>,
    /// Row-major `len × n_counters`, values before the step's own update.
    pub counters: Vec<u32>,
    pub n_counters: usize,
}

impl Trace {
    pub fn new<S>(srm: &Srm, tau: &Trajectory<S>) -> Self {
        let masks: Vec<u64> = tau
            .steps
            .iter()
            .map(|s| srm.event_mask(&s.events))
            .collect();
        Self::from_masks(srm, masks)
    }

    pub fn from_masks(srm: &Srm, masks: Vec<u64>) -> Self {
        let n_counters = srm.counters().len();
        let mut counters = Vec::with_capacity(masks.len() * n_counters);
        let mut cur = vec![0u32; n_counters];
        for &mask in &masks {
            counters.extend_from_slice(&cur);
            advance_counters(srm, mask, &mut cur);
        }
        Self {
            masks,
            counters,
            n_counters,
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn counters_at(&self, t: usize) -> &[u32] {
        &self.counters[t * self.n_counters..(t + 1) * self.n_counters]
    }

    /// Last index `< t` whose mask contains `event`.
    pub fn last_before(&self, t: usize, event: usize) -> Option<usize> {
        let bit = 1u64 << event;
        (0..t).rev().find(|&i| self.masks[i] & bit != 0)
    }
}

pub(crate) fn advance_counters(srm: &Srm, mask: u64, counters: &mut [u32]) {
    for (c, decl) in counters.iter_mut().zip(srm.counters()) {
        if let Some(r) = decl.reset_on {
            if mask & (1u64 << r.0) != 0 {
                *c = 0;
            }
        }
        if mask & (1u64 << decl.inc_on.0) != 0 {
            *c += 1;
        }
    }
}

pub(crate) struct Selection {
    pub rule: Option<usize>,
    pub enabled: Vec<usize>,
}

/// Evaluates every rule leaving `q` in priority order.
pub(crate) fn select(
    srm: &Srm,
    q: StateId,
    mask: u64,
    counters: &[u32],
    h: &[f64],
) -> Result<Selection, EvalError> {
    let mut enabled = Vec::new();
    for &i in srm.rules_from(q) {
        if srm.rules()[i].guard.eval(mask, counters, h)? {
            enabled.push(i);
        }
    }
    Ok(Selection {
        rule: enabled.first().copied(),
        enabled,
    })
}

/// A pending hindsight rewrite, resolved to concrete indices.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Rewrite<R> {
    pub trigger: usize,
    /// Indices zeroed, `start..trigger`.
    pub start: usize,
    pub awards: Vec<(usize, R)>,
}

/// Resolves the window and award locations of a directive fired at `t`.
/// Awards are lowered with `lower`, which sees the counters at `t`.
pub(crate) fn resolve_rewrite<R>(
    trace: &Trace,
    t: usize,
    directive: &HindsightDirective,
    mut lower: impl FnMut(&super::NumExpr) -> Result<R, EvalError>,
) -> Result<Rewrite<R>, EvalError> {
    let start = trace
        .last_before(t, directive.zero_since.0)
        .map_or(0, |i| i + 1);
    let mut awards = Vec::new();
    for a in &directive.awards {
        let bit = 1u64 << a.locate_last.0;
        if let Some(idx) = (start..t).rev().find(|&i| trace.masks[i] & bit != 0) {
            awards.push((idx, lower(&a.reward)?));
        }
    }
    Ok(Rewrite {
        trigger: t,
        start,
        awards,
    })
}

pub(crate) fn apply_rewrite(
    rewards: &mut [f64],
    start: usize,
    trigger: usize,
    awards: &[(usize, f64)],
) {
    rewards[start..trigger].iter_mut().for_each(|r| *r = 0.0);
    for &(idx, value) in awards {
        rewards[idx] = value;
    }
}

/// Resolves one transition of `srm` at state `q` for the last step of
/// `prefix`. Counters see the events of `prefix` before its last step.
pub fn step<S>(
    srm: &Srm,
    q: StateId,
    prefix: &Trajectory<S>,
    h: &HoleAssignment,
) -> Result<StepOutcome, EvalError> {
    let h = h.values();
    srm.check_dimension(h)?;
    if q.0 >= srm.states().len() {
        return Err(EvalError::UndeclaredState(q.0));
    }
    let last = prefix.steps.last().ok_or(EvalError::EmptyPrefix)?;
    let mut counters = vec![0u32; srm.counters().len()];
    for s in &prefix.steps[..prefix.len() - 1] {
        advance_counters(srm, srm.event_mask(&s.events), &mut counters);
    }
    let mask = srm.event_mask(&last.events);
    let sel = select(srm, q, mask, &counters, h)?;
    let overlapping = if sel.enabled.len() > 1 {
        sel.enabled.clone()
    } else {
        Vec::new()
    };
    Ok(match sel.rule {
        Some(i) => {
            let rule = &srm.rules()[i];
            StepOutcome {
                next: rule.to,
                reward: rule.reward.to_affine(&counters, h.len())?.eval(h),
                dummy: false,
                rule: Some(i),
                overlapping,
            }
        }
        None => StepOutcome {
            next: q,
            reward: 0.0,
            dummy: true,
            rule: None,
            overlapping,
        },
    })
}

/// Runs the machine over a whole trajectory from its initial state, then
/// applies hindsight rewrites in trigger order.
pub fn run<S>(srm: &Srm, tau: &Trajectory<S>, h: &HoleAssignment) -> Result<RunResult, EvalError> {
    let h = h.values();
    srm.check_dimension(h)?;
    let trace = Trace::new(srm, tau);
    let n = trace.len();
    let mut q = srm.initial();
    let mut path = Vec::with_capacity(n + 1);
    let mut rewards = Vec::with_capacity(n);
    let mut dummy_mask = Vec::with_capacity(n);
    let mut fired = Vec::with_capacity(n);
    let mut diagnostics = Vec::new();
    let mut rewrites = Vec::new();
    path.push(q);
    for t in 0..n {
        let counters = trace.counters_at(t);
        let sel = select(srm, q, trace.masks[t], counters, h)?;
        if sel.enabled.len() > 1 {
            diagnostics.push(OverlapDiagnostic {
                t,
                state: q,
                rules: sel.enabled.clone(),
            });
        }
        match sel.rule {
            Some(i) => {
                let rule = &srm.rules()[i];
                rewards.push(rule.reward.to_affine(counters, h.len())?.eval(h));
                if let Some(d) = &rule.hindsight {
                    rewrites.push(resolve_rewrite(&trace, t, d, |e| {
                        Ok(e.to_affine(counters, h.len())?.eval(h))
                    })?);
                }
                dummy_mask.push(false);
                fired.push(Some(i));
                q = rule.to;
            }
            None => {
                rewards.push(0.0);
                dummy_mask.push(true);
                fired.push(None);
            }
        }
        path.push(q);
    }
    for rw in &rewrites {
        apply_rewrite(&mut rewards, rw.start, rw.trigger, &rw.awards);
    }
    let total = total_of(&rewards);
    Ok(RunResult {
        path,
        rewards,
        total,
        dummy_mask,
        fired,
        diagnostics,
    })
}
