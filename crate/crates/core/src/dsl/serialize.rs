use std::fmt::Write;

use crate::constraints::ConstraintAtom;
use crate::srm::{Guard, NumExpr, Srm};

/// Writes a machine back to source text. Parsing the output yields a machine
/// structurally equal to the input.
pub fn serialize(srm: &Srm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "srm {} {{", srm.name());
    if srm.n_holes() > 0 {
        let holes: Vec<String> = srm.holes().iter().map(|h| format!("?{h}")).collect();
        let _ = writeln!(out, "    holes {};", holes.join(" "));
    }
    for c in srm.counters() {
        let _ = write!(
            out,
            "    counter {} {{ inc on {};",
            c.name,
            srm.event_name(c.inc_on)
        );
        if let Some(r) = c.reset_on {
            let _ = write!(out, " reset on {};", srm.event_name(r));
        }
        out.push_str(" }\n");
    }
    let atoms = &srm.constraint().atoms;
    let mut i = 0;
    while i < atoms.len() {
        let label = &atoms[i].label;
        let mut parts = Vec::new();
        while i < atoms.len() && atoms[i].label == *label {
            parts.push(atom_text(srm, &atoms[i]));
            i += 1;
        }
        let _ = writeln!(out, "    constraint {label}: {};", parts.join(" && "));
    }
    for (q, name) in srm.states().iter().enumerate() {
        let _ = write!(out, "    state {name}");
        if srm.initial().0 == q {
            out.push_str(" init");
        }
        if srm.is_accepting(crate::srm::StateId(q)) {
            out.push_str(" accepting");
        }
        out.push_str(";\n");
    }
    for r in srm.rules() {
        let _ = write!(
            out,
            "    {} -> {} : {} // {}",
            srm.state_name(r.from),
            srm.state_name(r.to),
            guard(srm, &r.guard, 0),
            num(srm, &r.reward, 0)
        );
        if let Some(d) = &r.hindsight {
            let _ = write!(
                out,
                " hindsight {{ zero since {};",
                srm.event_name(d.zero_since)
            );
            for a in &d.awards {
                let _ = write!(
                    out,
                    " award last({}) {};",
                    srm.event_name(a.locate_last),
                    num(srm, &a.reward, 0)
                );
            }
            out.push_str(" }");
        }
        if r.priority != 0 {
            let _ = write!(out, " prio {}", r.priority);
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

/// One constraint atom as source text, e.g. `?5 + ?4 <= 0`.
pub fn atom_text(srm: &Srm, atom: &ConstraintAtom) -> String {
    format!(
        "{} {} {}",
        num(srm, &atom.lhs, 0),
        atom.op.symbol(),
        num(srm, &atom.rhs, 0)
    )
}

fn paren(s: String, wrap: bool) -> String {
    if wrap {
        format!("({s})")
    } else {
        s
    }
}

// Precedence levels: 1 `+ -`, 2 `*`, 3 unary minus, 4 atoms. Binary
// operators associate to the left, so a right operand at the same level
// needs parentheses.
fn num(srm: &Srm, e: &NumExpr, min: u8) -> String {
    let (s, level) = match e {
        NumExpr::Const(v) => (
            format!("{v}"),
            if *v < 0.0 || v.is_sign_negative() {
                3
            } else {
                4
            },
        ),
        NumExpr::Hole(h) => (format!("?{}", srm.holes()[h.0]), 4),
        NumExpr::Counter(c) => (format!("#{}", srm.counters()[c.0].name), 4),
        NumExpr::Neg(a) => {
            // `-2` would read back as a negative literal.
            let inner = match **a {
                NumExpr::Const(_) => format!("({})", num(srm, a, 0)),
                _ => num(srm, a, 3),
            };
            (format!("-{inner}"), 3)
        }
        NumExpr::Add(a, b) => (format!("{} + {}", num(srm, a, 1), num(srm, b, 2)), 1),
        NumExpr::Sub(a, b) => (format!("{} - {}", num(srm, a, 1), num(srm, b, 2)), 1),
        NumExpr::Mul(a, b) => (format!("{} * {}", num(srm, a, 2), num(srm, b, 3)), 2),
    };
    paren(s, level < min)
}

// Levels: 1 `||`, 2 `&&`, 3 `!`, 4 comparisons and atoms.
fn guard(srm: &Srm, g: &Guard, min: u8) -> String {
    let (s, level) = match g {
        Guard::True => ("true".to_string(), 4),
        Guard::False => ("false".to_string(), 4),
        Guard::Event(e) => (srm.event_name(*e).to_string(), 4),
        Guard::Cmp(a, op, b) => (
            format!("{} {} {}", num(srm, a, 0), op.symbol(), num(srm, b, 0)),
            4,
        ),
        Guard::Not(a) => (format!("!{}", guard(srm, a, 3)), 3),
        Guard::And(a, b) => (format!("{} && {}", guard(srm, a, 2), guard(srm, b, 3)), 2),
        Guard::Or(a, b) => (format!("{} || {}", guard(srm, a, 1), guard(srm, b, 2)), 1),
    };
    paren(s, level < min)
}
