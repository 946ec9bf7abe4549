//! Hole-symbolic evaluation of a machine over a fixed trajectory.
//!
//! Everything that does not depend on the holes (event extraction, counter
//! traces, hindsight windows, and every transition whose guards are
//! hole-free) is computed once. Rewards are kept as affine forms over the
//! holes. The first time the run reaches a state with a hole-dependent guard
//! the path itself depends on the assignment, so the remaining steps are
//! stored as a residual tail and re-executed per assignment.

use super::engine::{
    apply_rewrite, resolve_rewrite, select, total_of, OverlapDiagnostic, Rewrite, RunResult, Trace,
};
use super::{Affine, EvalError, HoleAssignment, Srm, StateId, Trajectory};

#[derive(Clone, Debug, PartialEq)]
struct FixedStep {
    /// `None` for a dummy transition.
    reward: Option<Affine>,
    rule: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialRun {
    n_holes: usize,
    trace: Trace,
    fixed: Vec<FixedStep>,
    /// States visited by the fixed prefix, `fixed.len() + 1` entries.
    path: Vec<StateId>,
    diagnostics: Vec<OverlapDiagnostic>,
    rewrites: Vec<Rewrite<Affine>>,
}

impl PartialRun {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.len() == 0
    }

    pub fn n_holes(&self) -> usize {
        self.n_holes
    }

    /// Number of leading steps whose transition is independent of the holes.
    pub fn fixed_len(&self) -> usize {
        self.fixed.len()
    }

    /// True when some step must re-evaluate hole-dependent guards.
    pub fn has_residual(&self) -> bool {
        self.fixed.len() < self.trace.len()
    }

    /// Affine form of the pre-hindsight reward at a fixed step.
    pub fn step_affine(&self, t: usize) -> Option<Affine> {
        let step = self.fixed.get(t)?;
        Some(
            step.reward
                .clone()
                .unwrap_or_else(|| Affine::constant(self.n_holes, 0.0)),
        )
    }

    /// Total reward as an affine form, available when the whole run is
    /// fixed and has no hindsight rewrites.
    pub fn total_affine(&self) -> Option<Affine> {
        if self.has_residual() || !self.rewrites.is_empty() {
            return None;
        }
        let mut acc = Affine::constant(self.n_holes, 0.0);
        for s in &self.fixed {
            if let Some(r) = &s.reward {
                acc.add_assign(r);
            }
        }
        Some(acc)
    }

    /// Completes the run for one assignment.
    pub fn substitute(&self, srm: &Srm, h: &HoleAssignment) -> Result<RunResult, EvalError> {
        let hv = h.values();
        srm.check_dimension(hv)?;
        if hv.len() != self.n_holes {
            return Err(EvalError::DimensionMismatch {
                expected: self.n_holes,
                got: hv.len(),
            });
        }
        let n = self.trace.len();
        let mut rewards = Vec::with_capacity(n);
        let mut dummy_mask = Vec::with_capacity(n);
        let mut fired = Vec::with_capacity(n);
        for s in &self.fixed {
            rewards.push(s.reward.as_ref().map_or(0.0, |a| a.eval(hv)));
            dummy_mask.push(s.reward.is_none());
            fired.push(s.rule);
        }
        let mut path = self.path.clone();
        let mut diagnostics = self.diagnostics.clone();
        let mut rewrites: Vec<Rewrite<f64>> = self
            .rewrites
            .iter()
            .map(|rw| Rewrite {
                trigger: rw.trigger,
                start: rw.start,
                awards: rw.awards.iter().map(|(i, a)| (*i, a.eval(hv))).collect(),
            })
            .collect();

        let mut q = *path.last().expect("path holds at least q0");
        for t in self.fixed.len()..n {
            let counters = self.trace.counters_at(t);
            let sel = select(srm, q, self.trace.masks[t], counters, hv)?;
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
                    rewards.push(rule.reward.to_affine(counters, hv.len())?.eval(hv));
                    if let Some(d) = &rule.hindsight {
                        rewrites.push(resolve_rewrite(&self.trace, t, d, |e| {
                            Ok(e.to_affine(counters, hv.len())?.eval(hv))
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

    /// Per-step rewards for one assignment.
    pub fn rewards(&self, srm: &Srm, h: &HoleAssignment) -> Result<Vec<f64>, EvalError> {
        Ok(self.substitute(srm, h)?.rewards)
    }
}

/// Evaluates `srm` over `tau` leaving the holes symbolic.
pub fn partial_evaluate<S>(srm: &Srm, tau: &Trajectory<S>) -> Result<PartialRun, EvalError> {
    let n_holes = srm.n_holes();
    let trace = Trace::new(srm, tau);
    let zeros = vec![0.0; n_holes];
    let mut q = srm.initial();
    let mut fixed = Vec::new();
    let mut path = vec![q];
    let mut diagnostics = Vec::new();
    let mut rewrites = Vec::new();
    for t in 0..trace.len() {
        let symbolic = srm
            .rules_from(q)
            .iter()
            .any(|&i| srm.rules()[i].guard.has_holes());
        if symbolic {
            break;
        }
        let counters = trace.counters_at(t);
        // Hole-free guards: the zero vector stands in for any assignment.
        let sel = select(srm, q, trace.masks[t], counters, &zeros)?;
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
                let reward = rule.reward.to_affine(counters, n_holes)?;
                if let Some(d) = &rule.hindsight {
                    rewrites.push(resolve_rewrite(&trace, t, d, |e| {
                        e.to_affine(counters, n_holes)
                    })?);
                }
                fixed.push(FixedStep {
                    reward: Some(reward),
                    rule: Some(i),
                });
                q = rule.to;
            }
            None => fixed.push(FixedStep {
                reward: None,
                rule: None,
            }),
        }
        path.push(q);
    }
    Ok(PartialRun {
        n_holes,
        trace,
        fixed,
        path,
        diagnostics,
        rewrites,
    })
}
