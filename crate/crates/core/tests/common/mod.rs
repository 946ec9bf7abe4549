//! Random machines, rendered to DSL text, plus a direct interpreter of the
//! same description that shares no code with the engine.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

use srmkit::srm::{HoleAssignment, Trajectory};

pub const EVENTS: [&str; 5] = ["e0", "e1", "e2", "e3", "e4"];

#[derive(Clone, Debug)]
pub enum G {
    True,
    Ev(usize),
    Not(Box<G>),
    And(Box<G>, Box<G>),
    Or(Box<G>, Box<G>),
    /// `#C * ?h + k > 0` when `gt`, else `<= 0`.
    Cmp {
        counter: usize,
        hole: usize,
        k: f64,
        gt: bool,
    },
}

/// `c0 + Σ k ?i + #C * ?j`.
#[derive(Clone, Debug)]
pub struct Aff {
    pub c0: f64,
    pub terms: Vec<(f64, usize)>,
    pub counter_term: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub from: usize,
    pub to: usize,
    pub guard: G,
    pub reward: Aff,
    pub prio: i64,
    pub hindsight: Option<(usize, Vec<(usize, Aff)>)>,
}

#[derive(Clone, Debug)]
pub struct Machine {
    pub n_states: usize,
    pub init: usize,
    pub n_holes: usize,
    /// `(inc_on, reset_on)` per counter.
    pub counters: Vec<(usize, Option<usize>)>,
    pub rules: Vec<Rule>,
    pub hole_guards: bool,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn signed(x: f64) -> String {
    if x < 0.0 {
        format!("- {}", num(-x))
    } else {
        format!("+ {}", num(x))
    }
}

fn half_steps<R: Rng>(rng: &mut R, lo: i32, hi: i32) -> f64 {
    rng.random_range(lo..=hi) as f64 * 0.5
}

impl Aff {
    fn random<R: Rng>(rng: &mut R, n_holes: usize, n_counters: usize) -> Self {
        let c0 = if rng.random_bool(0.5) {
            half_steps(rng, -4, 4)
        } else {
            0.0
        };
        let terms = (0..rng.random_range(0..3))
            .map(|_| (half_steps(rng, -4, 4), rng.random_range(0..n_holes)))
            .collect();
        let counter_term = (n_counters > 0 && rng.random_bool(0.3)).then(|| {
            (
                rng.random_range(0..n_counters),
                rng.random_range(0..n_holes),
            )
        });
        Self {
            c0,
            terms,
            counter_term,
        }
    }

    fn text(&self) -> String {
        let mut s = if self.c0 < 0.0 {
            format!("0 - {}", num(-self.c0))
        } else {
            num(self.c0)
        };
        for (k, i) in &self.terms {
            s += &format!(" {} * ?{}", signed(*k), i + 1);
        }
        if let Some((c, j)) = self.counter_term {
            s += &format!(" + #C{c} * ?{}", j + 1);
        }
        s
    }

    pub fn eval(&self, counters: &[u32], h: &[f64]) -> f64 {
        let mut v = self.c0;
        for (k, i) in &self.terms {
            v += k * h[*i];
        }
        if let Some((c, j)) = self.counter_term {
            v += counters[c] as f64 * h[j];
        }
        v
    }
}

impl G {
    fn random<R: Rng>(
        rng: &mut R,
        depth: u32,
        n_holes: usize,
        n_counters: usize,
        holes_ok: bool,
    ) -> Self {
        let leaf = depth == 0 || rng.random_bool(0.4);
        if leaf {
            if holes_ok && n_counters > 0 && rng.random_bool(0.25) {
                return G::Cmp {
                    counter: rng.random_range(0..n_counters),
                    hole: rng.random_range(0..n_holes),
                    k: half_steps(rng, -4, 4),
                    gt: rng.random_bool(0.5),
                };
            }
            if rng.random_bool(0.1) {
                return G::True;
            }
            return G::Ev(rng.random_range(0..EVENTS.len()));
        }
        let kind = rng.random_range(0..3);
        let mut sub = || Box::new(G::random(rng, depth - 1, n_holes, n_counters, holes_ok));
        match kind {
            0 => G::Not(sub()),
            1 => G::And(sub(), sub()),
            _ => G::Or(sub(), sub()),
        }
    }

    fn text(&self) -> String {
        match self {
            G::True => "true".into(),
            G::Ev(e) => EVENTS[*e].into(),
            G::Not(g) => format!("!({})", g.text()),
            G::And(a, b) => format!("({}) && ({})", a.text(), b.text()),
            G::Or(a, b) => format!("({}) || ({})", a.text(), b.text()),
            G::Cmp {
                counter,
                hole,
                k,
                gt,
            } => {
                format!(
                    "#C{counter} * ?{} {} {} 0",
                    hole + 1,
                    signed(*k),
                    if *gt { ">" } else { "<=" }
                )
            }
        }
    }

    pub fn eval(&self, events: &[bool], counters: &[u32], h: &[f64]) -> bool {
        match self {
            G::True => true,
            G::Ev(e) => events[*e],
            G::Not(g) => !g.eval(events, counters, h),
            G::And(a, b) => a.eval(events, counters, h) && b.eval(events, counters, h),
            G::Or(a, b) => a.eval(events, counters, h) || b.eval(events, counters, h),
            G::Cmp {
                counter,
                hole,
                k,
                gt,
            } => {
                let v = counters[*counter] as f64 * h[*hole] + k;
                if *gt {
                    v > 0.0
                } else {
                    v <= 0.0
                }
            }
        }
    }

    fn has_holes(&self) -> bool {
        match self {
            G::Cmp { .. } => true,
            G::Not(g) => g.has_holes(),
            G::And(a, b) | G::Or(a, b) => a.has_holes() || b.has_holes(),
            _ => false,
        }
    }
}

impl Machine {
    /// `hindsight` allows rules with hindsight directives; `hole_guards`
    /// allows hole-dependent guards.
    pub fn random<R: Rng>(rng: &mut R, hindsight: bool, hole_guards: bool) -> Self {
        let n_states = rng.random_range(1..=4);
        let n_holes = rng.random_range(1..=4);
        let n_counters = rng.random_range(0..=2);
        let counters = (0..n_counters)
            .map(|_| {
                (
                    rng.random_range(0..EVENTS.len()),
                    rng.random_bool(0.5)
                        .then(|| rng.random_range(0..EVENTS.len())),
                )
            })
            .collect();
        let n_rules = rng.random_range(0..=8);
        let rules: Vec<Rule> = (0..n_rules)
            .map(|_| Rule {
                from: rng.random_range(0..n_states),
                to: rng.random_range(0..n_states),
                guard: G::random(rng, 2, n_holes, n_counters, hole_guards),
                reward: Aff::random(rng, n_holes, n_counters),
                prio: if rng.random_bool(0.3) {
                    rng.random_range(-2..=2)
                } else {
                    0
                },
                hindsight: (hindsight && rng.random_bool(0.2)).then(|| {
                    let zero = rng.random_range(0..EVENTS.len());
                    let awards = (0..rng.random_range(0..=2))
                        .map(|_| {
                            (
                                rng.random_range(0..EVENTS.len()),
                                Aff::random(rng, n_holes, n_counters),
                            )
                        })
                        .collect();
                    (zero, awards)
                }),
            })
            .collect();
        let hole_guards = rules.iter().any(|r| r.guard.has_holes());
        Self {
            n_states,
            init: rng.random_range(0..n_states),
            n_holes,
            counters,
            rules,
            hole_guards,
        }
    }

    pub fn has_hindsight(&self) -> bool {
        self.rules.iter().any(|r| r.hindsight.is_some())
    }

    pub fn text(&self) -> String {
        let mut s = String::from("srm Random {\n");
        let holes: Vec<String> = (1..=self.n_holes).map(|i| format!("?{i}")).collect();
        s += &format!("    holes {};\n", holes.join(" "));
        for (i, (inc, reset)) in self.counters.iter().enumerate() {
            s += &format!("    counter C{i} {{ inc on {};", EVENTS[*inc]);
            if let Some(r) = reset {
                s += &format!(" reset on {};", EVENTS[*r]);
            }
            s += " }\n";
        }
        for q in 0..self.n_states {
            s += &format!(
                "    state S{q}{};\n",
                if q == self.init { " init" } else { "" }
            );
        }
        for r in &self.rules {
            s += &format!(
                "    S{} -> S{} : {} // {}",
                r.from,
                r.to,
                r.guard.text(),
                r.reward.text()
            );
            if let Some((zero, awards)) = &r.hindsight {
                s += &format!(" hindsight {{ zero since {};", EVENTS[*zero]);
                for (e, a) in awards {
                    s += &format!(" award last({}) {};", EVENTS[*e], a.text());
                }
                s += " }";
            }
            if r.prio != 0 {
                s += &format!(" prio {}", r.prio);
            }
            s += ";\n";
        }
        s + "}\n"
    }

    /// Reference semantics, step by step.
    pub fn interpret(&self, events: &[Vec<bool>], h: &[f64]) -> Reference {
        let n = events.len();
        let mut counters = vec![0u32; self.counters.len()];
        let mut pre = Vec::with_capacity(n);
        for ev in events {
            pre.push(counters.clone());
            for (c, (inc, reset)) in counters.iter_mut().zip(&self.counters) {
                if reset.is_some_and(|r| ev[r]) {
                    *c = 0;
                }
                if ev[*inc] {
                    *c += 1;
                }
            }
        }
        let mut order: Vec<usize> = (0..self.rules.len()).collect();
        order.sort_by_key(|&i| (self.rules[i].prio, i));

        let mut q = self.init;
        let mut path = vec![q];
        let mut rewards = Vec::with_capacity(n);
        let mut dummy = Vec::with_capacity(n);
        let mut rewrites = Vec::new();
        for t in 0..n {
            let hit = order.iter().copied().find(|&i| {
                self.rules[i].from == q && self.rules[i].guard.eval(&events[t], &pre[t], h)
            });
            match hit {
                Some(i) => {
                    let r = &self.rules[i];
                    rewards.push(r.reward.eval(&pre[t], h));
                    dummy.push(false);
                    if let Some((zero, awards)) = &r.hindsight {
                        let start = (0..t)
                            .rev()
                            .find(|&j| events[j][*zero])
                            .map_or(0, |j| j + 1);
                        let located: Vec<(usize, f64)> = awards
                            .iter()
                            .filter_map(|(e, a)| {
                                (start..t)
                                    .rev()
                                    .find(|&j| events[j][*e])
                                    .map(|j| (j, a.eval(&pre[t], h)))
                            })
                            .collect();
                        rewrites.push((start, t, located));
                    }
                    q = r.to;
                }
                None => {
                    rewards.push(0.0);
                    dummy.push(true);
                }
            }
            path.push(q);
        }
        for (start, t, located) in rewrites {
            for r in &mut rewards[start..t] {
                *r = 0.0;
            }
            for (j, v) in located {
                rewards[j] = v;
            }
        }
        Reference {
            path,
            rewards,
            dummy,
        }
    }
}

#[derive(Debug)]
pub struct Reference {
    pub path: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dummy: Vec<bool>,
}

/// Random event trace. Some steps carry an atom the machines never mention.
pub fn random_events<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Vec<bool>> {
    (0..rng.random_range(0..=max_len))
        .map(|_| (0..EVENTS.len()).map(|_| rng.random_bool(0.25)).collect())
        .collect()
}

pub fn trajectory<R: Rng>(rng: &mut R, events: &[Vec<bool>]) -> Trajectory {
    Trajectory::from_events(events.iter().map(|ev| {
        let mut names: Vec<&str> = EVENTS
            .iter()
            .zip(ev)
            .filter(|(_, on)| **on)
            .map(|(n, _)| *n)
            .collect();
        if rng.random_bool(0.1) {
            names.push(*["unrelated", "noise"].choose(rng).unwrap());
        }
        names
    }))
}

pub fn random_holes<R: Rng>(rng: &mut R, n: usize) -> HoleAssignment {
    HoleAssignment::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// A machine whose only content is `n` random affine constraint atoms.
pub fn constraint_machine<R: Rng>(rng: &mut R, n_holes: usize, n_atoms: usize) -> srmkit::srm::Srm {
    let ops = ["<=", "<", ">=", ">", "=="];
    let side = |rng: &mut R| {
        let mut s = format!("{}", rng.random_range(-6..=6) as f64 * 0.5);
        for i in 1..=n_holes {
            if rng.random_bool(0.5) {
                s += &format!(" + {} * ?{i}", rng.random_range(-4..=4) as f64 * 0.5);
            }
        }
        s.replace("+ -", "- ")
            .replacen('-', "0 - ", usize::from(s.starts_with('-')))
    };
    let holes: Vec<String> = (1..=n_holes).map(|i| format!("?{i}")).collect();
    let mut src = format!("srm C {{ holes {};", holes.join(" "));
    for k in 0..n_atoms {
        src += &format!(
            " constraint m{k}: {} {} {};",
            side(rng),
            ops[rng.random_range(0..ops.len())],
            side(rng)
        );
    }
    src += " state A init; }";
    srmkit::dsl::parse(&src).unwrap_or_else(|e| panic!("{e:?}\n{src}"))
}
