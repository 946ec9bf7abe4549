//! The `.srm` text format.
//!
//! ```text
//! srm DoorKey {
//!     holes ?1 ?2;
//!     counter DROPS { inc on Drop_Key; }
//!     constraint goal: ?2 <= ?1;
//!     state Start init;
//!     state Done accepting;
//!     Start -> Done : Reach_Goal // ?1;
//!     Start -> Start : Pick_up_Key && #DROPS == 0 // ?2 prio 1;
//! }
//! ```
//!
//! `#` followed by a letter is a counter reference; any other `#` starts a
//! line comment.

mod lexer;
mod parser;
mod serialize;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::srm::Srm;

pub use serialize::{atom_text, serialize};
pub use validate::{validate, validate_with, ValidateOptions};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            span,
        }
    }

    pub fn warning(message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {}", self.span, self.message)
    }
}

/// Parses a machine from source text. Spans name the file `<input>`.
pub fn parse(text: &str) -> Result<Srm, Vec<ParseDiagnostic>> {
    parse_named("<input>", text)
}

pub fn parse_named(file: &str, text: &str) -> Result<Srm, Vec<ParseDiagnostic>> {
    let tokens = lexer::lex(file, text)?;
    parser::parse_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srm::{run, HoleAssignment, Trajectory};

    fn first_error(text: &str) -> ParseDiagnostic {
        parse(text).unwrap_err().into_iter().next().unwrap()
    }

    const SMALL: &str = "
        srm S {
            holes ?a ?b;
            counter C { inc on Close_Door; reset on Unlock_Door; }
            constraint ?b <= ?a && ?a >= 0;
            state A init;
            state B accepting;
            A -> A : Close_Door && #C * ?b + ?a > 0 // ?b;
            A -> B : Reach_Goal // 2 * ?a - 1 prio -1;
        }";

    #[test]
    fn parses_a_small_machine() {
        let srm = parse(SMALL).unwrap();
        assert_eq!(srm.states().len(), 2);
        assert_eq!(srm.n_holes(), 2);
        assert_eq!(srm.counters().len(), 1);
        assert_eq!(srm.rules().len(), 2);
        assert_eq!(srm.constraint().atoms.len(), 2);
        assert_eq!(srm.constraint().atoms[0].label, "c1");
        assert_eq!(srm.events(), ["Close_Door", "Unlock_Door", "Reach_Goal"]);
        assert_eq!(srm.rules()[1].priority, -1);
        let tau =
            Trajectory::from_events([vec!["Close_Door"], vec!["Close_Door"], vec!["Reach_Goal"]]);
        let r = run(&srm, &tau, &HoleAssignment::new(vec![0.5, -0.3])).unwrap();
        // Second Close_Door sees C = 1: 1 * -0.3 + 0.5 > 0 still holds.
        assert_eq!(r.rewards, vec![-0.3, -0.3, 0.0]);
    }

    #[test]
    fn empty_file() {
        let e = first_error("  # nothing here\n");
        assert_eq!(e.message, "missing srm block");
        assert!(e.is_error());
    }

    #[test]
    fn non_affine_reward() {
        let e = first_error("srm S { holes ?1 ?2; state A init; A -> A : x // ?1 * ?2; }");
        assert_eq!(e.message, "holes must combine affinely");
        assert_eq!((e.span.line, e.span.column), (1, 50));
    }

    #[test]
    fn name_errors() {
        let cases = [
            (
                "srm S { state A init; A -> B : x // 1; }",
                "unknown state `B`",
            ),
            (
                "srm S { state A init; A -> A : #K > 0 // 1; }",
                "unknown counter `#K`",
            ),
            (
                "srm S { state A init; A -> A : x // ?q; }",
                "unknown hole `?q`",
            ),
            ("srm S { state A init; state A; }", "duplicate state `A`"),
            ("srm S { state A; }", "missing init state"),
        ];
        for (src, msg) in cases {
            let e = first_error(src);
            assert!(e.message.starts_with(msg), "{src}: {}", e.message);
        }
    }

    #[test]
    fn malformed_hindsight() {
        let e =
            first_error("srm S { state A init; A -> A : x // 1 hindsight { award last(y) 1; }; }");
        assert!(
            e.message.starts_with("malformed hindsight"),
            "{}",
            e.message
        );
        let e = first_error("srm S { state A init; A -> A : x // 1 hindsight { zero until y; }; }");
        assert!(e.message.contains("since"), "{}", e.message);
        let e = first_error("srm S { state A init; A -> A : x // 1 hindsight { give y; }; }");
        assert!(
            e.message.starts_with("malformed hindsight"),
            "{}",
            e.message
        );
    }

    #[test]
    fn constraints_reject_disjunction_and_counters() {
        let e = first_error("srm S { holes ?1; constraint ?1 <= 0 || ?1 >= 1; state A init; }");
        assert!(e.message.contains("||"));
        let e = first_error(
            "srm S { holes ?1; counter C { inc on x; } constraint #C <= ?1; state A init; }",
        );
        assert!(e.message.contains("only mention holes"));
    }

    #[test]
    fn several_errors_are_collected() {
        let errs = parse("srm S { state A init; A -> B : x // 1; A -> C : y // 1; }").unwrap_err();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn recovers_after_syntax_error() {
        let errs = parse("srm S { state A init; A -> : x // 1; state B init state; }").unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
    }

    #[test]
    fn spans_point_inside_the_text() {
        let src = "srm S {\n  state A init;\n  A -> A : x // ?zz;\n}";
        let e = first_error(src);
        let line = src.lines().nth(e.span.line - 1).unwrap();
        assert!(e.span.column + e.span.length - 1 <= line.chars().count());
        assert_eq!(
            &line[e.span.column - 1..e.span.column - 1 + e.span.length],
            "?zz"
        );
    }
}
