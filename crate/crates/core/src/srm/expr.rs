//! Guard and reward expressions.
//!
//! Numeric expressions may mention holes, counters and constants. For any
//! fixed counter valuation they must be affine in the holes, which lets the
//! engine lower them into an [`Affine`] form and evaluate that form against a
//! hole assignment. Both the direct engine and partial evaluation go through
//! [`Affine::eval`], so the two paths produce bit-identical rewards.

use std::fmt;

use super::EvalError;

/// Index of a declared hole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HoleId(pub usize);

/// Index of a declared counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CounterId(pub usize);

/// Index into the machine's event vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Numeric term of a reward or of a guard comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum NumExpr {
    Const(f64),
    Hole(HoleId),
    Counter(CounterId),
    Neg(Box<NumExpr>),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    /// At most one operand may depend on holes.
    Mul(Box<NumExpr>, Box<NumExpr>),
}

#[allow(clippy::should_implement_trait)]
impl NumExpr {
    pub fn add(a: NumExpr, b: NumExpr) -> NumExpr {
        NumExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: NumExpr, b: NumExpr) -> NumExpr {
        NumExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: NumExpr, b: NumExpr) -> NumExpr {
        NumExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: NumExpr) -> NumExpr {
        NumExpr::Neg(Box::new(a))
    }

    pub fn has_holes(&self) -> bool {
        match self {
            NumExpr::Hole(_) => true,
            NumExpr::Const(_) | NumExpr::Counter(_) => false,
            NumExpr::Neg(a) => a.has_holes(),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                a.has_holes() || b.has_holes()
            }
        }
    }

    pub fn has_counters(&self) -> bool {
        match self {
            NumExpr::Counter(_) => true,
            NumExpr::Const(_) | NumExpr::Hole(_) => false,
            NumExpr::Neg(a) => a.has_counters(),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                a.has_counters() || b.has_counters()
            }
        }
    }

    /// Static affinity check: no product joins two hole-dependent factors.
    pub fn is_affine(&self) -> bool {
        match self {
            NumExpr::Const(_) | NumExpr::Hole(_) | NumExpr::Counter(_) => true,
            NumExpr::Neg(a) => a.is_affine(),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) => a.is_affine() && b.is_affine(),
            NumExpr::Mul(a, b) => {
                a.is_affine() && b.is_affine() && !(a.has_holes() && b.has_holes())
            }
        }
    }

    pub fn visit_holes(&self, f: &mut impl FnMut(HoleId)) {
        match self {
            NumExpr::Hole(h) => f(*h),
            NumExpr::Const(_) | NumExpr::Counter(_) => {}
            NumExpr::Neg(a) => a.visit_holes(f),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                a.visit_holes(f);
                b.visit_holes(f);
            }
        }
    }

    pub fn visit_counters(&self, f: &mut impl FnMut(CounterId)) {
        match self {
            NumExpr::Counter(c) => f(*c),
            NumExpr::Const(_) | NumExpr::Hole(_) => {}
            NumExpr::Neg(a) => a.visit_counters(f),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                a.visit_counters(f);
                b.visit_counters(f);
            }
        }
    }

    /// Lowers the expression to an affine form over `n_holes` holes under
    /// the given counter valuation.
    pub fn to_affine(&self, counters: &[u32], n_holes: usize) -> Result<Affine, EvalError> {
        Ok(match self {
            NumExpr::Const(c) => Affine::constant(n_holes, *c),
            NumExpr::Hole(HoleId(i)) => {
                if *i >= n_holes {
                    return Err(EvalError::UndeclaredHole(*i));
                }
                Affine::unit(n_holes, *i)
            }
            NumExpr::Counter(CounterId(c)) => {
                let v = counters.get(*c).ok_or(EvalError::UndeclaredCounter(*c))?;
                Affine::constant(n_holes, f64::from(*v))
            }
            NumExpr::Neg(a) => a.to_affine(counters, n_holes)?.scaled(-1.0),
            NumExpr::Add(a, b) => {
                let mut x = a.to_affine(counters, n_holes)?;
                x.add_assign(&b.to_affine(counters, n_holes)?);
                x
            }
            NumExpr::Sub(a, b) => {
                let mut x = a.to_affine(counters, n_holes)?;
                x.add_assign(&b.to_affine(counters, n_holes)?.scaled(-1.0));
                x
            }
            NumExpr::Mul(a, b) => {
                let x = a.to_affine(counters, n_holes)?;
                let y = b.to_affine(counters, n_holes)?;
                if x.is_constant() {
                    y.scaled(x.constant)
                } else if y.is_constant() {
                    x.scaled(y.constant)
                } else {
                    return Err(EvalError::NonAffine);
                }
            }
        })
    }

    /// Tree-walking evaluation. Used where no affine form is needed, and as
    /// an independent reference for the affine lowering.
    pub fn evaluate(&self, counters: &[u32], holes: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            NumExpr::Const(c) => *c,
            NumExpr::Hole(HoleId(i)) => *holes.get(*i).ok_or(EvalError::UndeclaredHole(*i))?,
            NumExpr::Counter(CounterId(c)) => {
                f64::from(*counters.get(*c).ok_or(EvalError::UndeclaredCounter(*c))?)
            }
            NumExpr::Neg(a) => -a.evaluate(counters, holes)?,
            NumExpr::Add(a, b) => a.evaluate(counters, holes)? + b.evaluate(counters, holes)?,
            NumExpr::Sub(a, b) => a.evaluate(counters, holes)? - b.evaluate(counters, holes)?,
            NumExpr::Mul(a, b) => a.evaluate(counters, holes)? * b.evaluate(counters, holes)?,
        })
    }

    /// Replaces every hole by its assigned constant.
    pub fn substitute(&self, holes: &[f64]) -> NumExpr {
        match self {
            NumExpr::Hole(HoleId(i)) => NumExpr::Const(holes[*i]),
            NumExpr::Const(_) | NumExpr::Counter(_) => self.clone(),
            NumExpr::Neg(a) => NumExpr::neg(a.substitute(holes)),
            NumExpr::Add(a, b) => NumExpr::add(a.substitute(holes), b.substitute(holes)),
            NumExpr::Sub(a, b) => NumExpr::sub(a.substitute(holes), b.substitute(holes)),
            NumExpr::Mul(a, b) => NumExpr::mul(a.substitute(holes), b.substitute(holes)),
        }
    }
}

/// Boolean guard over the current step's events and the counter valuation.
#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    True,
    False,
    Event(EventId),
    Cmp(NumExpr, CmpOp, NumExpr),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

#[allow(clippy::should_implement_trait)]
impl Guard {
    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Guard) -> Guard {
        Guard::Not(Box::new(a))
    }

    pub fn cmp(lhs: NumExpr, op: CmpOp, rhs: NumExpr) -> Guard {
        Guard::Cmp(lhs, op, rhs)
    }

    pub fn has_holes(&self) -> bool {
        match self {
            Guard::True | Guard::False | Guard::Event(_) => false,
            Guard::Cmp(a, _, b) => a.has_holes() || b.has_holes(),
            Guard::Not(a) => a.has_holes(),
            Guard::And(a, b) | Guard::Or(a, b) => a.has_holes() || b.has_holes(),
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            Guard::True | Guard::False | Guard::Event(_) => true,
            Guard::Cmp(a, _, b) => a.is_affine() && b.is_affine(),
            Guard::Not(a) => a.is_affine(),
            Guard::And(a, b) | Guard::Or(a, b) => a.is_affine() && b.is_affine(),
        }
    }

    pub fn visit_events(&self, f: &mut impl FnMut(EventId)) {
        match self {
            Guard::Event(e) => f(*e),
            Guard::True | Guard::False | Guard::Cmp(..) => {}
            Guard::Not(a) => a.visit_events(f),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.visit_events(f);
                b.visit_events(f);
            }
        }
    }

    pub fn visit_numeric(&self, f: &mut impl FnMut(&NumExpr)) {
        match self {
            Guard::True | Guard::False | Guard::Event(_) => {}
            Guard::Cmp(a, _, b) => {
                f(a);
                f(b);
            }
            Guard::Not(a) => a.visit_numeric(f),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.visit_numeric(f);
                b.visit_numeric(f);
            }
        }
    }

    /// Evaluates the guard. `events` is a bitmask over the machine's event
    /// vocabulary. Comparisons go through the affine lowering.
    pub fn eval(&self, events: u64, counters: &[u32], holes: &[f64]) -> Result<bool, EvalError> {
        Ok(match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Event(EventId(e)) => {
                if *e >= 64 {
                    return Err(EvalError::UndeclaredEvent(*e));
                }
                events & (1u64 << e) != 0
            }
            Guard::Cmp(a, op, b) => {
                let n = holes.len();
                let lhs = a.to_affine(counters, n)?.eval(holes);
                let rhs = b.to_affine(counters, n)?.eval(holes);
                op.apply(lhs, rhs)
            }
            Guard::Not(a) => !a.eval(events, counters, holes)?,
            Guard::And(a, b) => {
                a.eval(events, counters, holes)? && b.eval(events, counters, holes)?
            }
            Guard::Or(a, b) => {
                a.eval(events, counters, holes)? || b.eval(events, counters, holes)?
            }
        })
    }

    pub fn substitute(&self, holes: &[f64]) -> Guard {
        match self {
            Guard::True | Guard::False | Guard::Event(_) => self.clone(),
            Guard::Cmp(a, op, b) => Guard::Cmp(a.substitute(holes), *op, b.substitute(holes)),
            Guard::Not(a) => Guard::not(a.substitute(holes)),
            Guard::And(a, b) => Guard::and(a.substitute(holes), b.substitute(holes)),
            Guard::Or(a, b) => Guard::or(a.substitute(holes), b.substitute(holes)),
        }
    }
}

/// `constant + coeffs · h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(n_holes: usize, value: f64) -> Self {
        Self {
            coeffs: vec![0.0; n_holes],
            constant: value,
        }
    }

    pub fn unit(n_holes: usize, hole: usize) -> Self {
        let mut coeffs = vec![0.0; n_holes];
        coeffs[hole] = 1.0;
        Self {
            coeffs,
            constant: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= k);
        self.constant *= k;
        self
    }

    pub fn add_assign(&mut self, other: &Affine) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o;
        }
        self.constant += other.constant;
    }

    pub fn eval(&self, holes: &[f64]) -> f64 {
        let mut acc = self.constant;
        for (c, h) in self.coeffs.iter().zip(holes) {
            acc += c * h;
        }
        acc
    }
}
