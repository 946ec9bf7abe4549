//! Symbolic reward machines: domain types and execution semantics.
//!
//! An [`Srm`] is a finite-state machine whose transitions are guarded by
//! predicates over the events of the current step (and counters over past
//! events) and whose outputs are reward terms. Guards and rewards may contain
//! holes, real-valued unknowns that a [`HoleAssignment`] fills in.

mod engine;
mod expr;
mod partial;
mod product;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{self, ConstraintViolation, SymbolicConstraint};
use crate::dsl::SourceSpan;

pub use engine::{run, step, OverlapDiagnostic, RunResult, StepOutcome};
pub use expr::{Affine, CmpOp, CounterId, EventId, Guard, HoleId, NumExpr};
pub use partial::{partial_evaluate, PartialRun};
pub use product::{
    product_probability, EnvTransition, EventEnv, ProductError, ProductState, ProductStep,
    RewardDelivery, SyncProduct,
};

/// Maximum number of distinct event atoms one machine may reference.
pub const MAX_EVENTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// Event atoms that hold at one step of a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSet(BTreeSet<String>);

impl EventSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: impl Into<String>) -> bool {
        self.0.insert(atom.into())
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.0.contains(atom)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for EventSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(e)?;
        }
        f.write_str("}")
    }
}

/// One state-action pair with the events it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step<S> {
    pub state: S,
    pub action: usize,
    pub events: EventSet,
}

/// Alternating state-action sequence. The machine only reads the events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S = ()> {
    pub steps: Vec<Step<S>>,
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Self { steps: Vec::new() }
    }
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, state: S, action: usize, events: EventSet) {
        self.steps.push(Step {
            state,
            action,
            events,
        });
    }
}

impl Trajectory<()> {
    /// Event-only trajectory, convenient for tests and replays.
    pub fn from_events<I, E, A>(events: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: IntoIterator<Item = A>,
        A: Into<String>,
    {
        Self {
            steps: events
                .into_iter()
                .map(|e| Step {
                    state: (),
                    action: 0,
                    events: e.into_iter().collect(),
                })
                .collect(),
        }
    }
}

/// Counts occurrences of `inc_on` since the last `reset_on`.
///
/// When both atoms hold at the same step the reset is applied first, so the
/// counter ends the step at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterDecl {
    pub name: String,
    pub inc_on: EventId,
    pub reset_on: Option<EventId>,
}

/// Award issued by a hindsight directive.
#[derive(Clone, Debug, PartialEq)]
pub struct HindsightAward {
    /// The award lands on the last step inside the window where this event held.
    pub locate_last: EventId,
    pub reward: NumExpr,
}

/// Trajectory-level rewrite attached to a rule. When the rule fires at step
/// `t`, every reward strictly between the last `zero_since` occurrence and
/// `t` is set to 0, then each award overwrites the reward at its located step.
#[derive(Clone, Debug, PartialEq)]
pub struct HindsightDirective {
    pub zero_since: EventId,
    pub awards: Vec<HindsightAward>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRule {
    pub from: StateId,
    pub guard: Guard,
    pub reward: NumExpr,
    pub to: StateId,
    pub hindsight: Option<HindsightDirective>,
    /// Lower numbers win when several guards hold at once.
    pub priority: i64,
}

/// Source locations of the parsed items. Never part of structural equality.
#[derive(Clone, Debug, Default)]
pub struct SourceMap {
    pub states: Vec<Option<SourceSpan>>,
    pub rules: Vec<Option<SourceSpan>>,
    pub constraint_atoms: Vec<Option<SourceSpan>>,
}

impl PartialEq for SourceMap {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("reference to undeclared hole #{0}")]
    UndeclaredHole(usize),
    #[error("reference to undeclared counter #{0}")]
    UndeclaredCounter(usize),
    #[error("reference to undeclared event #{0}")]
    UndeclaredEvent(usize),
    #[error("holes must combine affinely")]
    NonAffine,
    #[error("hole assignment has {got} entries, machine declares {expected} holes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot step on an empty trajectory prefix")]
    EmptyPrefix,
    #[error("state #{0} is not declared")]
    UndeclaredState(usize),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SrmError {
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("missing init state")]
    MissingInit,
    #[error("more than one init state")]
    MultipleInit,
    #[error("machine references more than {MAX_EVENTS} distinct events")]
    TooManyEvents,
    #[error("rule {rule}: {source}")]
    Rule { rule: usize, source: EvalError },
    #[error("counter `{counter}`: {source}")]
    Counter { counter: String, source: EvalError },
    #[error("constraint atom `{atom}`: {message}")]
    Constraint { atom: String, message: String },
}

/// A real vector with one entry per declared hole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HoleAssignment(Vec<f64>);

impl HoleAssignment {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for HoleAssignment {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A symbolic reward machine.
#[derive(Clone, Debug, PartialEq)]
pub struct Srm {
    name: String,
    states: Vec<String>,
    initial: StateId,
    accepting: Vec<bool>,
    holes: Vec<String>,
    events: Vec<String>,
    counters: Vec<CounterDecl>,
    rules: Vec<TransitionRule>,
    constraint: SymbolicConstraint,
    /// Rule indices per source state, sorted by (priority, declaration order).
    by_state: Vec<Vec<usize>>,
    source: SourceMap,
}

impl Srm {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.get(q.0).copied().unwrap_or(false)
    }

    pub fn accepting(&self) -> impl Iterator<Item = StateId> + '_ {
        self.accepting
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| StateId(i))
    }

    pub fn holes(&self) -> &[String] {
        &self.holes
    }

    pub fn n_holes(&self) -> usize {
        self.holes.len()
    }

    pub fn hole_id(&self, name: &str) -> Option<HoleId> {
        self.holes.iter().position(|s| s == name).map(HoleId)
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.events.iter().position(|s| s == name).map(EventId)
    }

    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e.0]
    }

    pub fn counters(&self) -> &[CounterDecl] {
        &self.counters
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.rules
    }

    pub fn rules_from(&self, q: StateId) -> &[usize] {
        &self.by_state[q.0]
    }

    pub fn constraint(&self) -> &SymbolicConstraint {
        &self.constraint
    }

    pub fn source_map(&self) -> &SourceMap {
        &self.source
    }

    pub fn has_hindsight(&self) -> bool {
        self.rules.iter().any(|r| r.hindsight.is_some())
    }

    /// Bitmask of the machine's events present in `set`; unknown atoms are ignored.
    pub fn event_mask(&self, set: &EventSet) -> u64 {
        set.iter()
            .filter_map(|e| self.event_id(e))
            .fold(0u64, |m, EventId(i)| m | (1u64 << i))
    }

    /// Copy of the machine with its constraint replaced.
    pub fn with_constraint(&self, constraint: SymbolicConstraint) -> Result<Srm, SrmError> {
        let mut b = SrmBuilder::from_srm(self);
        b.constraint = constraint;
        b.build()
    }

    pub(crate) fn check_dimension(&self, h: &[f64]) -> Result<(), EvalError> {
        if h.len() != self.holes.len() {
            return Err(EvalError::DimensionMismatch {
                expected: self.holes.len(),
                got: h.len(),
            });
        }
        Ok(())
    }
}

/// A hole-free machine obtained by substituting a feasible assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteSrm {
    machine: Srm,
    assignment: HoleAssignment,
}

impl ConcreteSrm {
    pub fn machine(&self) -> &Srm {
        &self.machine
    }

    pub fn assignment(&self) -> &HoleAssignment {
        &self.assignment
    }

    pub fn run<S>(&self, tau: &Trajectory<S>) -> Result<RunResult, EvalError> {
        run(&self.machine, tau, &HoleAssignment::zeros(0))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConcretizeError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Violation(#[from] ConstraintViolation),
}

/// Substitutes `h` into every guard and reward, provided the machine's
/// symbolic constraint holds at `h`.
pub fn concretize(srm: &Srm, h: &HoleAssignment) -> Result<ConcreteSrm, ConcretizeError> {
    srm.check_dimension(h.values())?;
    let lcs =
        constraints::compile(srm.constraint(), srm.n_holes()).map_err(|_| EvalError::NonAffine)?;
    let check = constraints::satisfied(&lcs, h);
    if !check.satisfied {
        return Err(ConstraintViolation::from_check(srm.constraint(), &lcs, &check).into());
    }
    let hv = h.values();
    let rules = srm
        .rules
        .iter()
        .map(|r| TransitionRule {
            from: r.from,
            guard: r.guard.substitute(hv),
            reward: r.reward.substitute(hv),
            to: r.to,
            hindsight: r.hindsight.as_ref().map(|d| HindsightDirective {
                zero_since: d.zero_since,
                awards: d
                    .awards
                    .iter()
                    .map(|a| HindsightAward {
                        locate_last: a.locate_last,
                        reward: a.reward.substitute(hv),
                    })
                    .collect(),
            }),
            priority: r.priority,
        })
        .collect();
    let machine = Srm {
        name: srm.name.clone(),
        states: srm.states.clone(),
        initial: srm.initial,
        accepting: srm.accepting.clone(),
        holes: Vec::new(),
        events: srm.events.clone(),
        counters: srm.counters.clone(),
        rules,
        constraint: SymbolicConstraint::default(),
        by_state: srm.by_state.clone(),
        source: srm.source.clone(),
    };
    Ok(ConcreteSrm {
        machine,
        assignment: h.clone(),
    })
}

/// Incremental constructor that validates the machine invariants on `build`.
#[derive(Clone, Debug, Default)]
pub struct SrmBuilder {
    pub name: String,
    pub states: Vec<String>,
    pub initial: Vec<StateId>,
    pub accepting: Vec<StateId>,
    pub holes: Vec<String>,
    pub events: Vec<String>,
    pub counters: Vec<CounterDecl>,
    pub rules: Vec<TransitionRule>,
    pub constraint: SymbolicConstraint,
    pub source: SourceMap,
}

impl SrmBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn from_srm(srm: &Srm) -> Self {
        Self {
            name: srm.name.clone(),
            states: srm.states.clone(),
            initial: vec![srm.initial],
            accepting: srm.accepting().collect(),
            holes: srm.holes.clone(),
            events: srm.events.clone(),
            counters: srm.counters.clone(),
            rules: srm.rules.clone(),
            constraint: srm.constraint.clone(),
            source: srm.source.clone(),
        }
    }

    pub fn state(&mut self, name: impl Into<String>) -> StateId {
        let name = name.into();
        if let Some(i) = self.states.iter().position(|s| *s == name) {
            return StateId(i);
        }
        self.states.push(name);
        StateId(self.states.len() - 1)
    }

    pub fn hole(&mut self, name: impl Into<String>) -> HoleId {
        let name = name.into();
        if let Some(i) = self.holes.iter().position(|s| *s == name) {
            return HoleId(i);
        }
        self.holes.push(name);
        HoleId(self.holes.len() - 1)
    }

    /// Interns an event atom.
    pub fn event(&mut self, name: impl Into<String>) -> EventId {
        let name = name.into();
        if let Some(i) = self.events.iter().position(|s| *s == name) {
            return EventId(i);
        }
        self.events.push(name);
        EventId(self.events.len() - 1)
    }

    pub fn counter(
        &mut self,
        name: impl Into<String>,
        inc_on: EventId,
        reset_on: Option<EventId>,
    ) -> CounterId {
        self.counters.push(CounterDecl {
            name: name.into(),
            inc_on,
            reset_on,
        });
        CounterId(self.counters.len() - 1)
    }

    pub fn set_initial(&mut self, q: StateId) -> &mut Self {
        self.initial.push(q);
        self
    }

    pub fn set_accepting(&mut self, q: StateId) -> &mut Self {
        if !self.accepting.contains(&q) {
            self.accepting.push(q);
        }
        self
    }

    pub fn rule(&mut self, rule: TransitionRule) -> usize {
        self.rules.push(rule);
        self.rules.len() - 1
    }

    pub fn build(self) -> Result<Srm, SrmError> {
        check_unique("state", &self.states)?;
        check_unique("hole", &self.holes)?;
        check_unique("event", &self.events)?;
        let counter_names: Vec<String> = self.counters.iter().map(|c| c.name.clone()).collect();
        check_unique("counter", &counter_names)?;
        if self.events.len() > MAX_EVENTS {
            return Err(SrmError::TooManyEvents);
        }
        let initial = match self.initial.as_slice() {
            [] => return Err(SrmError::MissingInit),
            [q] => *q,
            _ => return Err(SrmError::MultipleInit),
        };
        let n_states = self.states.len();
        let state_ok = |q: StateId| q.0 < n_states;
        if !state_ok(initial) {
            return Err(SrmError::MissingInit);
        }
        let n_events = self.events.len();
        for c in &self.counters {
            for e in std::iter::once(c.inc_on).chain(c.reset_on) {
                if e.0 >= n_events {
                    return Err(SrmError::Counter {
                        counter: c.name.clone(),
                        source: EvalError::UndeclaredEvent(e.0),
                    });
                }
            }
        }
        let mut accepting = vec![false; n_states];
        for q in &self.accepting {
            if !state_ok(*q) {
                return Err(SrmError::Rule {
                    rule: usize::MAX,
                    source: EvalError::UndeclaredState(q.0),
                });
            }
            accepting[q.0] = true;
        }
        let scope = Scope {
            n_holes: self.holes.len(),
            n_counters: self.counters.len(),
            n_events,
        };
        for (i, r) in self.rules.iter().enumerate() {
            let wrap = |source| SrmError::Rule { rule: i, source };
            for q in [r.from, r.to] {
                if !state_ok(q) {
                    return Err(wrap(EvalError::UndeclaredState(q.0)));
                }
            }
            scope.check_guard(&r.guard).map_err(wrap)?;
            scope.check_num(&r.reward).map_err(wrap)?;
            if let Some(d) = &r.hindsight {
                scope.check_event(d.zero_since).map_err(wrap)?;
                for a in &d.awards {
                    scope.check_event(a.locate_last).map_err(wrap)?;
                    scope.check_num(&a.reward).map_err(wrap)?;
                }
            }
        }
        for atom in &self.constraint.atoms {
            let err = |message: String| SrmError::Constraint {
                atom: atom.label.clone(),
                message,
            };
            for e in [&atom.lhs, &atom.rhs] {
                if e.has_counters() {
                    return Err(err("constraints may only mention holes".into()));
                }
                scope.check_num(e).map_err(|e| err(e.to_string()))?;
            }
        }
        let mut by_state = vec![Vec::new(); n_states];
        for (i, r) in self.rules.iter().enumerate() {
            by_state[r.from.0].push(i);
        }
        for list in &mut by_state {
            list.sort_by_key(|&i| (self.rules[i].priority, i));
        }
        let mut source = self.source;
        source.states.resize(n_states, None);
        source.rules.resize(self.rules.len(), None);
        source
            .constraint_atoms
            .resize(self.constraint.atoms.len(), None);
        Ok(Srm {
            name: self.name,
            states: self.states,
            initial,
            accepting,
            holes: self.holes,
            events: self.events,
            counters: self.counters,
            rules: self.rules,
            constraint: self.constraint,
            by_state,
            source,
        })
    }
}

fn check_unique(kind: &'static str, names: &[String]) -> Result<(), SrmError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(SrmError::Duplicate {
                kind,
                name: n.clone(),
            });
        }
    }
    Ok(())
}

struct Scope {
    n_holes: usize,
    n_counters: usize,
    n_events: usize,
}

impl Scope {
    fn check_event(&self, e: EventId) -> Result<(), EvalError> {
        if e.0 >= self.n_events {
            return Err(EvalError::UndeclaredEvent(e.0));
        }
        Ok(())
    }

    fn check_num(&self, e: &NumExpr) -> Result<(), EvalError> {
        let mut err = None;
        e.visit_holes(&mut |h| {
            if h.0 >= self.n_holes {
                err.get_or_insert(EvalError::UndeclaredHole(h.0));
            }
        });
        e.visit_counters(&mut |c| {
            if c.0 >= self.n_counters {
                err.get_or_insert(EvalError::UndeclaredCounter(c.0));
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if !e.is_affine() {
            return Err(EvalError::NonAffine);
        }
        Ok(())
    }

    fn check_guard(&self, g: &Guard) -> Result<(), EvalError> {
        let mut err = None;
        g.visit_events(&mut |e| {
            if let Err(x) = self.check_event(e) {
                err.get_or_insert(x);
            }
        });
        g.visit_numeric(&mut |e| {
            if let Err(x) = self.check_num(e) {
                err.get_or_insert(x);
            }
        });
        err.map_or(Ok(()), Err)
    }
}
