//! Recursive-descent parser for `.srm` sources.
//!
//! Parsing happens in two phases: the token stream becomes an untyped
//! syntax tree, then [`lower`] resolves names, types every expression as a
//! guard or a numeric term, and builds the machine.

use super::lexer::{Tok, Token};
use super::{ParseDiagnostic, SourceSpan};
use crate::constraints::ConstraintAtom;
use crate::srm::{
    CmpOp, CounterId, Guard, HindsightAward, HindsightDirective, HoleId, NumExpr, Srm, SrmBuilder,
    TransitionRule,
};

#[derive(Clone, Debug)]
pub(crate) enum Ex {
    Num(f64),
    Hole(String),
    Counter(String),
    Ident(String),
    Bool(bool),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Cmp(CmpOp, Box<Node>, Box<Node>),
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub ex: Ex,
    pub span: SourceSpan,
}

#[derive(Debug)]
struct Name {
    text: String,
    span: SourceSpan,
}

#[derive(Debug)]
struct CounterAst {
    name: Name,
    inc: Option<Name>,
    reset: Option<Name>,
}

#[derive(Debug)]
struct StateAst {
    name: Name,
    init: bool,
    accepting: bool,
}

#[derive(Debug)]
struct ConstraintAst {
    label: Option<Name>,
    expr: Node,
}

#[derive(Debug)]
enum HindsightItem {
    Zero(Name),
    Award(Name, Node),
}

#[derive(Debug)]
struct HindsightAst {
    span: SourceSpan,
    items: Vec<HindsightItem>,
}

#[derive(Debug)]
struct RuleAst {
    from: Name,
    to: Name,
    guard: Node,
    reward: Node,
    hindsight: Option<HindsightAst>,
    priority: i64,
    span: SourceSpan,
}

#[derive(Debug, Default)]
struct MachineAst {
    name: Option<Name>,
    holes: Vec<Name>,
    counters: Vec<CounterAst>,
    constraints: Vec<ConstraintAst>,
    states: Vec<StateAst>,
    rules: Vec<RuleAst>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, message: impl Into<String>, span: SourceSpan) -> PResult<T> {
        self.diags.push(ParseDiagnostic::error(message, span));
        Err(())
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            let found = self.peek().describe();
            let span = self.span();
            self.error(format!("expected {}, found {found}", tok.describe()), span)
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            let span = self.span();
            self.error(format!("expected `{kw}`, found {found}"), span)
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(text) => {
                let span = self.bump().span;
                Ok(Name { text, span })
            }
            other => {
                let span = self.span();
                self.error(format!("expected {what}, found {}", other.describe()), span)
            }
        }
    }

    /// Skips past the next `;` at the current nesting depth, or stops before
    /// the `}` closing it.
    fn recover(&mut self) {
        let mut depth = 0i32;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        if *self.peek() == Tok::Semi {
                            self.bump();
                        }
                        return;
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn machine(&mut self) -> MachineAst {
        let mut m = MachineAst::default();
        if *self.peek() == Tok::Eof {
            let span = self.span();
            let _ = self.error::<()>("missing srm block", span);
            return m;
        }
        if self.expect_keyword("srm").is_err() {
            return m;
        }
        let Ok(name) = self.ident("a machine name") else {
            return m;
        };
        m.name = Some(name);
        if self.expect(Tok::LBrace).is_err() {
            return m;
        }
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    let span = self.span();
                    let _ = self.error::<()>("unterminated srm block, expected `}`", span);
                    return m;
                }
                _ => {
                    if self.item(&mut m).is_err() {
                        self.recover();
                    }
                }
            }
        }
        if *self.peek() != Tok::Eof {
            let span = self.span();
            let _ = self.error::<()>("unexpected input after the srm block", span);
        }
        m
    }

    fn item(&mut self, m: &mut MachineAst) -> PResult<()> {
        if self.is_keyword("holes") {
            self.bump();
            while let Tok::Hole(text) = self.peek().clone() {
                let span = self.bump().span;
                m.holes.push(Name { text, span });
            }
            self.expect(Tok::Semi)?;
            return Ok(());
        }
        if self.is_keyword("counter") {
            self.bump();
            let name = self.ident("a counter name")?;
            self.expect(Tok::LBrace)?;
            let mut c = CounterAst {
                name,
                inc: None,
                reset: None,
            };
            while *self.peek() != Tok::RBrace {
                if self.is_keyword("inc") {
                    self.bump();
                    self.expect_keyword("on")?;
                    c.inc = Some(self.ident("an event")?);
                } else if self.is_keyword("reset") {
                    self.bump();
                    self.expect_keyword("on")?;
                    c.reset = Some(self.ident("an event")?);
                } else {
                    let found = self.peek().describe();
                    let span = self.span();
                    return self.error(
                        format!("expected `inc on` or `reset on`, found {found}"),
                        span,
                    );
                }
                self.expect(Tok::Semi)?;
            }
            self.bump();
            if c.inc.is_none() {
                let span = c.name.span.clone();
                return self.error(
                    format!("counter `{}` needs an `inc on` event", c.name.text),
                    span,
                );
            }
            m.counters.push(c);
            return Ok(());
        }
        if self.is_keyword("constraint") {
            self.bump();
            let label = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
                let l = self.ident("a label")?;
                self.bump();
                Some(l)
            } else {
                None
            };
            let expr = self.expr()?;
            self.expect(Tok::Semi)?;
            m.constraints.push(ConstraintAst { label, expr });
            return Ok(());
        }
        if self.is_keyword("state") {
            self.bump();
            let name = self.ident("a state name")?;
            let mut s = StateAst {
                name,
                init: false,
                accepting: false,
            };
            loop {
                if self.is_keyword("init") {
                    self.bump();
                    s.init = true;
                } else if self.is_keyword("accepting") {
                    self.bump();
                    s.accepting = true;
                } else {
                    break;
                }
            }
            self.expect(Tok::Semi)?;
            m.states.push(s);
            return Ok(());
        }
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Arrow {
            let rule = self.rule()?;
            m.rules.push(rule);
            return Ok(());
        }
        let found = self.peek().describe();
        let span = self.span();
        self.error(
            format!("expected a declaration or a rule, found {found}"),
            span,
        )
    }

    fn rule(&mut self) -> PResult<RuleAst> {
        let span = self.span();
        let from = self.ident("a state name")?;
        self.expect(Tok::Arrow)?;
        let to = self.ident("a state name")?;
        self.expect(Tok::Colon)?;
        let guard = self.expr()?;
        self.expect(Tok::Slashes)?;
        let reward = self.expr()?;
        let mut hindsight = None;
        let mut priority = 0;
        loop {
            if self.is_keyword("hindsight") {
                let hspan = self.bump().span;
                hindsight = Some(self.hindsight(hspan)?);
            } else if self.is_keyword("prio") {
                self.bump();
                priority = self.integer()?;
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(RuleAst {
            from,
            to,
            guard,
            reward,
            hindsight,
            priority,
            span,
        })
    }

    fn integer(&mut self) -> PResult<i64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => {
                self.bump();
                Ok(if negative { -(v as i64) } else { v as i64 })
            }
            other => {
                let span = self.span();
                self.error(
                    format!("expected an integer priority, found {}", other.describe()),
                    span,
                )
            }
        }
    }

    fn hindsight(&mut self, span: SourceSpan) -> PResult<HindsightAst> {
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        while *self.peek() != Tok::RBrace {
            if self.is_keyword("zero") {
                self.bump();
                self.expect_keyword("since")?;
                items.push(HindsightItem::Zero(self.ident("an event")?));
            } else if self.is_keyword("award") {
                self.bump();
                self.expect_keyword("last")?;
                self.expect(Tok::LParen)?;
                let ev = self.ident("an event")?;
                self.expect(Tok::RParen)?;
                let reward = self.expr()?;
                items.push(HindsightItem::Award(ev, reward));
            } else {
                let found = self.peek().describe();
                let span = self.span();
                return self.error(
                    format!("malformed hindsight directive: expected `zero since` or `award last`, found {found}"),
                    span,
                );
            }
            self.expect(Tok::Semi)?;
        }
        self.bump();
        Ok(HindsightAst { span, items })
    }

    fn expr(&mut self) -> PResult<Node> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Node> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            let span = lhs.span.clone();
            lhs = Node {
                ex: Ex::Or(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Node> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.not_expr()?;
            let span = lhs.span.clone();
            lhs = Node {
                ex: Ex::And(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Node> {
        if *self.peek() == Tok::Bang {
            let span = self.bump().span;
            let inner = self.not_expr()?;
            return Ok(Node {
                ex: Ex::Not(Box::new(inner)),
                span,
            });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Node> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            Tok::EqEq => CmpOp::Eq,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        let span = lhs.span.clone();
        Ok(Node {
            ex: Ex::Cmp(op, Box::new(lhs), Box::new(rhs)),
            span,
        })
    }

    fn add_expr(&mut self) -> PResult<Node> {
        let mut lhs = self.mul_expr()?;
        loop {
            let plus = match self.peek() {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            let span = lhs.span.clone();
            let ex = if plus {
                Ex::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Ex::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Node { ex, span };
        }
    }

    fn mul_expr(&mut self) -> PResult<Node> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.clone();
            lhs = Node {
                ex: Ex::Mul(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Node> {
        if *self.peek() == Tok::Minus {
            let span = self.bump().span;
            // A literal directly after the sign is a negative constant.
            if let Tok::Number(v) = *self.peek() {
                self.bump();
                return Ok(Node {
                    ex: Ex::Num(-v),
                    span,
                });
            }
            let inner = self.unary()?;
            return Ok(Node {
                ex: Ex::Neg(Box::new(inner)),
                span,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Node> {
        let span = self.span();
        let ex = match self.peek().clone() {
            Tok::Number(v) => Ex::Num(v),
            Tok::Hole(h) => Ex::Hole(h),
            Tok::Counter(c) => Ex::Counter(c),
            Tok::Ident(s) if s == "true" => Ex::Bool(true),
            Tok::Ident(s) if s == "false" => Ex::Bool(false),
            Tok::Ident(s) => Ex::Ident(s),
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(inner);
            }
            other => {
                return self.error(
                    format!("expected an expression, found {}", other.describe()),
                    span,
                );
            }
        };
        self.bump();
        Ok(Node { ex, span })
    }
}

/// Name resolution and typing.
struct Lowerer<'a> {
    b: SrmBuilder,
    diags: &'a mut Vec<ParseDiagnostic>,
    counter_names: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Guard,
    Reward,
    Constraint,
}

impl Lowerer<'_> {
    fn err(&mut self, message: impl Into<String>, span: &SourceSpan) {
        self.diags
            .push(ParseDiagnostic::error(message, span.clone()));
    }

    fn num(&mut self, n: &Node, ctx: Ctx) -> Option<NumExpr> {
        let e = match &n.ex {
            Ex::Num(v) => NumExpr::Const(*v),
            Ex::Hole(name) => match self.b.holes.iter().position(|h| h == name) {
                Some(i) => NumExpr::Hole(HoleId(i)),
                None => {
                    self.err(
                        format!("unknown hole `?{name}`; declare it in `holes`"),
                        &n.span,
                    );
                    return None;
                }
            },
            Ex::Counter(name) => {
                if ctx == Ctx::Constraint {
                    self.err("constraints may only mention holes", &n.span);
                    return None;
                }
                match self.counter_names.iter().position(|c| c == name) {
                    Some(i) => NumExpr::Counter(CounterId(i)),
                    None => {
                        self.err(format!("unknown counter `#{name}`"), &n.span);
                        return None;
                    }
                }
            }
            Ex::Neg(a) => NumExpr::neg(self.num(a, ctx)?),
            Ex::Add(a, b) => {
                let (x, y) = (self.num(a, ctx), self.num(b, ctx));
                NumExpr::add(x?, y?)
            }
            Ex::Sub(a, b) => {
                let (x, y) = (self.num(a, ctx), self.num(b, ctx));
                NumExpr::sub(x?, y?)
            }
            Ex::Mul(a, b) => {
                let (x, y) = (self.num(a, ctx)?, self.num(b, ctx)?);
                if x.has_holes() && y.has_holes() {
                    self.err("holes must combine affinely", &n.span);
                    return None;
                }
                NumExpr::mul(x, y)
            }
            Ex::Ident(name) => {
                self.err(
                    format!("event `{name}` used where a number is expected"),
                    &n.span,
                );
                return None;
            }
            Ex::Bool(_) | Ex::Not(_) | Ex::And(..) | Ex::Or(..) | Ex::Cmp(..) => {
                self.err("expected a numeric expression, found a condition", &n.span);
                return None;
            }
        };
        Some(e)
    }

    fn guard(&mut self, n: &Node) -> Option<Guard> {
        let g = match &n.ex {
            Ex::Bool(true) => Guard::True,
            Ex::Bool(false) => Guard::False,
            Ex::Ident(name) => Guard::Event(self.b.event(name.clone())),
            Ex::Not(a) => Guard::not(self.guard(a)?),
            Ex::And(a, b) => {
                let (x, y) = (self.guard(a), self.guard(b));
                Guard::and(x?, y?)
            }
            Ex::Or(a, b) => {
                let (x, y) = (self.guard(a), self.guard(b));
                Guard::or(x?, y?)
            }
            Ex::Cmp(op, a, b) => {
                let (x, y) = (self.num(a, Ctx::Guard), self.num(b, Ctx::Guard));
                Guard::cmp(x?, *op, y?)
            }
            _ => {
                self.err("expected a condition, found a numeric expression", &n.span);
                return None;
            }
        };
        Some(g)
    }

    /// Flattens a conjunction of comparisons into constraint atoms.
    fn constraint_atoms(
        &mut self,
        n: &Node,
        label: &str,
        out: &mut Vec<(ConstraintAtom, SourceSpan)>,
    ) {
        match &n.ex {
            Ex::And(a, b) => {
                self.constraint_atoms(a, label, out);
                self.constraint_atoms(b, label, out);
            }
            Ex::Cmp(op, a, b) => {
                let (x, y) = (self.num(a, Ctx::Constraint), self.num(b, Ctx::Constraint));
                if let (Some(lhs), Some(rhs)) = (x, y) {
                    out.push((
                        ConstraintAtom {
                            label: label.to_string(),
                            lhs,
                            op: *op,
                            rhs,
                        },
                        n.span.clone(),
                    ));
                }
            }
            Ex::Or(..) => self.err(
                "constraints must be conjunctions; `||` is not allowed",
                &n.span,
            ),
            Ex::Not(_) => self.err(
                "constraints must be conjunctions of comparisons; `!` is not allowed",
                &n.span,
            ),
            Ex::Ident(name) => self.err(
                format!("constraints may only mention holes, found event `{name}`"),
                &n.span,
            ),
            _ => self.err("expected a comparison in the constraint", &n.span),
        }
    }
}

fn lower(m: MachineAst, diags: &mut Vec<ParseDiagnostic>) -> Option<Srm> {
    let name = m.name?;
    let mut lw = Lowerer {
        b: SrmBuilder::new(name.text.clone()),
        diags,
        counter_names: Vec::new(),
    };

    for h in &m.holes {
        if lw.b.holes.contains(&h.text) {
            lw.err(format!("duplicate hole `?{}`", h.text), &h.span);
        } else {
            lw.b.hole(h.text.clone());
        }
    }

    let mut init = Vec::new();
    for s in &m.states {
        if lw.b.states.contains(&s.name.text) {
            lw.err(format!("duplicate state `{}`", s.name.text), &s.name.span);
            continue;
        }
        let q = lw.b.state(s.name.text.clone());
        lw.b.source.states.push(Some(s.name.span.clone()));
        if s.init {
            init.push((q, s.name.span.clone()));
        }
        if s.accepting {
            lw.b.set_accepting(q);
        }
    }
    match init.as_slice() {
        [] => {
            let span = m
                .states
                .first()
                .map_or_else(|| name.span.clone(), |s| s.name.span.clone());
            lw.err("missing init state", &span);
        }
        [(q, _)] => {
            lw.b.set_initial(*q);
        }
        [_, (_, span), ..] => {
            let span = span.clone();
            lw.err("more than one init state", &span);
        }
    }

    for c in &m.counters {
        if lw.counter_names.contains(&c.name.text) {
            lw.err(format!("duplicate counter `{}`", c.name.text), &c.name.span);
            continue;
        }
        let inc =
            lw.b.event(c.inc.as_ref().expect("checked by the parser").text.clone());
        let reset = c.reset.as_ref().map(|r| lw.b.event(r.text.clone()));
        lw.b.counter(c.name.text.clone(), inc, reset);
        lw.counter_names.push(c.name.text.clone());
    }

    let mut atoms = Vec::new();
    for (k, c) in m.constraints.iter().enumerate() {
        let label = c
            .label
            .as_ref()
            .map_or_else(|| format!("c{}", k + 1), |l| l.text.clone());
        lw.constraint_atoms(&c.expr, &label, &mut atoms);
    }
    for (atom, span) in atoms {
        lw.b.constraint.atoms.push(atom);
        lw.b.source.constraint_atoms.push(Some(span));
    }

    for r in &m.rules {
        let state = |lw: &mut Lowerer, n: &Name| match lw.b.states.iter().position(|s| *s == n.text)
        {
            Some(i) => Some(crate::srm::StateId(i)),
            None => {
                lw.err(format!("unknown state `{}`", n.text), &n.span);
                None
            }
        };
        let from = state(&mut lw, &r.from);
        let to = state(&mut lw, &r.to);
        let guard = lw.guard(&r.guard);
        let reward = lw.num(&r.reward, Ctx::Reward);
        let hindsight = match &r.hindsight {
            None => Some(None),
            Some(h) => {
                let mut zero = None;
                let mut awards = Vec::new();
                let mut ok = true;
                for item in &h.items {
                    match item {
                        HindsightItem::Zero(ev) => {
                            if zero.is_some() {
                                lw.err(
                                    "malformed hindsight directive: more than one `zero since`",
                                    &ev.span,
                                );
                                ok = false;
                            }
                            zero = Some(lw.b.event(ev.text.clone()));
                        }
                        HindsightItem::Award(ev, expr) => {
                            let e = lw.b.event(ev.text.clone());
                            match lw.num(expr, Ctx::Reward) {
                                Some(reward) => awards.push(HindsightAward {
                                    locate_last: e,
                                    reward,
                                }),
                                None => ok = false,
                            }
                        }
                    }
                }
                match zero {
                    Some(zero_since) if ok => Some(Some(HindsightDirective { zero_since, awards })),
                    None => {
                        lw.err(
                            "malformed hindsight directive: missing `zero since`",
                            &h.span,
                        );
                        None
                    }
                    _ => None,
                }
            }
        };
        if let (Some(from), Some(to), Some(guard), Some(reward), Some(hindsight)) =
            (from, to, guard, reward, hindsight)
        {
            lw.b.rule(TransitionRule {
                from,
                guard,
                reward,
                to,
                hindsight,
                priority: r.priority,
            });
            lw.b.source.rules.push(Some(r.span.clone()));
        }
    }

    if !lw.diags.is_empty() {
        return None;
    }
    let Lowerer { b, diags, .. } = lw;
    match b.build() {
        Ok(srm) => Some(srm),
        Err(e) => {
            diags.push(ParseDiagnostic::error(e.to_string(), name.span.clone()));
            None
        }
    }
}

pub(crate) fn parse_tokens(tokens: Vec<Token>) -> Result<Srm, Vec<ParseDiagnostic>> {
    let mut p = Parser {
        tokens,
        pos: 0,
        diags: Vec::new(),
    };
    let ast = p.machine();
    let mut diags = p.diags;
    if !diags.is_empty() {
        return Err(diags);
    }
    match lower(ast, &mut diags) {
        Some(srm) if diags.is_empty() => Ok(srm),
        _ => Err(diags),
    }
}
