use std::collections::BTreeSet;

use super::{ParseDiagnostic, SourceSpan};
use crate::srm::{CounterId, EventId, Guard, NumExpr, Srm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Pairs whose guards mention more atoms than this are not checked.
    pub atom_budget: usize,
    /// Counter values `0..=counter_budget` are tried for every counter.
    pub counter_budget: u32,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            atom_budget: 12,
            counter_budget: 3,
        }
    }
}

pub fn validate(srm: &Srm) -> Vec<ParseDiagnostic> {
    validate_with(srm, ValidateOptions::default())
}

/// Static determinism check. For every pair of rules leaving the same state
/// it searches event subsets and small counter values for a step enabling
/// both guards. Comparisons that involve holes are treated as unknown, and a
/// pair that can only overlap through them is reported as resolved at
/// runtime.
pub fn validate_with(srm: &Srm, opts: ValidateOptions) -> Vec<ParseDiagnostic> {
    let mut out = Vec::new();
    for q in 0..srm.states().len() {
        let rules = srm.rules_from(crate::srm::StateId(q));
        for (x, &i) in rules.iter().enumerate() {
            for &j in &rules[x + 1..] {
                let (gi, gj) = (&srm.rules()[i].guard, &srm.rules()[j].guard);
                let mut events = BTreeSet::new();
                let mut counters = BTreeSet::new();
                for g in [gi, gj] {
                    g.visit_events(&mut |e| {
                        events.insert(e);
                    });
                    g.visit_numeric(&mut |n| {
                        n.visit_counters(&mut |c| {
                            counters.insert(c);
                        })
                    });
                }
                if events.len() > opts.atom_budget {
                    continue;
                }
                let events: Vec<EventId> = events.into_iter().collect();
                let counters: Vec<CounterId> = counters.into_iter().collect();
                let Some(definite) = overlap(srm, gi, gj, &events, &counters, opts.counter_budget)
                else {
                    continue;
                };
                let span = rule_span(srm, j);
                let (ni, nj) = (i + 1, j + 1);
                let state = srm.state_name(crate::srm::StateId(q));
                let msg = if definite {
                    format!(
                        "rules {ni} and {nj} from `{state}` can fire on the same step; rule {ni} wins by priority"
                    )
                } else {
                    format!("rules {ni} and {nj} from `{state}` may overlap depending on holes: runtime-resolved by priority")
                };
                out.push(ParseDiagnostic::warning(msg, span));
            }
        }
    }
    out
}

fn rule_span(srm: &Srm, rule: usize) -> SourceSpan {
    srm.source_map()
        .rules
        .get(rule)
        .cloned()
        .flatten()
        .unwrap_or(SourceSpan {
            file: "<srm>".into(),
            line: 1,
            column: 1,
            length: 1,
        })
}

/// `Some(true)` if some valuation makes both guards true, `Some(false)` if
/// that only happens when an unknown comparison goes their way.
fn overlap(
    srm: &Srm,
    a: &Guard,
    b: &Guard,
    events: &[EventId],
    counters: &[CounterId],
    budget: u32,
) -> Option<bool> {
    let mut possible = false;
    let mut vals = vec![0u32; srm.counters().len()];
    let combos = (budget as usize + 1).pow(counters.len() as u32);
    for subset in 0u64..(1u64 << events.len()) {
        let mask = events
            .iter()
            .enumerate()
            .filter(|(k, _)| subset & (1 << k) != 0)
            .fold(0u64, |m, (_, e)| m | (1u64 << e.0));
        for mut c in 0..combos {
            for id in counters {
                vals[id.0] = (c % (budget as usize + 1)) as u32;
                c /= budget as usize + 1;
            }
            match and3(eval3(a, mask, &vals), eval3(b, mask, &vals)) {
                Some(true) => return Some(true),
                None => possible = true,
                Some(false) => {}
            }
        }
    }
    possible.then_some(false)
}

fn and3(x: Option<bool>, y: Option<bool>) -> Option<bool> {
    match (x, y) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn eval3(g: &Guard, mask: u64, counters: &[u32]) -> Option<bool> {
    match g {
        Guard::True => Some(true),
        Guard::False => Some(false),
        Guard::Event(e) => Some(mask & (1u64 << e.0) != 0),
        Guard::Cmp(l, op, r) => Some(op.apply(num(l, counters)?, num(r, counters)?)),
        Guard::Not(a) => eval3(a, mask, counters).map(|v| !v),
        Guard::And(a, b) => and3(eval3(a, mask, counters), eval3(b, mask, counters)),
        Guard::Or(a, b) => match (eval3(a, mask, counters), eval3(b, mask, counters)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    }
}

fn num(e: &NumExpr, counters: &[u32]) -> Option<f64> {
    if e.has_holes() {
        return None;
    }
    e.evaluate(counters, &[]).ok()
}
