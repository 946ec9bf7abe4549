//! Symbolic constraints over hole assignments.
//!
//! A constraint is a conjunction of comparisons that are affine in the holes.
//! [`compile`] rewrites every atom into rows `a·h + b <= 0`; [`satisfied`]
//! checks them exactly and [`penalty`] is the differentiable relaxation used
//! while learning: `Σ_i BCE(sigmoid(relu(u_i)), 0)`.

use std::fmt;

use thiserror::Error;

use crate::srm::{Affine, CmpOp, HoleAssignment, NumExpr};

/// One comparison of a constraint, e.g. `mu2: ?5 + ?4 <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintAtom {
    pub label: String,
    pub lhs: NumExpr,
    pub op: CmpOp,
    pub rhs: NumExpr,
}

impl ConstraintAtom {
    /// Direct evaluation of the comparison.
    pub fn holds(&self, h: &[f64]) -> Result<bool, NonAffineAtom> {
        let err = || NonAffineAtom {
            label: self.label.clone(),
        };
        let l = self.lhs.evaluate(&[], h).map_err(|_| err())?;
        let r = self.rhs.evaluate(&[], h).map_err(|_| err())?;
        Ok(self.op.apply(l, r))
    }

    /// Number of holes with a non-zero coefficient in `lhs - rhs`.
    fn hole_support(&self, n_holes: usize) -> Option<usize> {
        let d = difference(self, n_holes).ok()?;
        Some(d.coeffs.iter().filter(|c| **c != 0.0).count())
    }
}

/// Conjunction of atoms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolicConstraint {
    pub atoms: Vec<ConstraintAtom>,
}

impl SymbolicConstraint {
    pub fn new(atoms: Vec<ConstraintAtom>) -> Self {
        Self { atoms }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Direct boolean evaluation of the whole conjunction.
    pub fn holds(&self, h: &[f64]) -> Result<bool, NonAffineAtom> {
        for a in &self.atoms {
            if !a.holds(h)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Keeps only atoms that constrain a single hole (sign constraints),
    /// dropping relational predicates.
    pub fn sign_only(&self, n_holes: usize) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.hole_support(n_holes).is_some_and(|n| n <= 1))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("constraint atom `{label}` is not affine in the holes")]
pub struct NonAffineAtom {
    pub label: String,
}

/// `u(h) = coeffs · h + offset`; the row is satisfied when `u(h) <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub offset: f64,
    /// Index of the source atom.
    pub atom: usize,
}

impl LinearRow {
    pub fn residual(&self, h: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(h)
            .fold(self.offset, |acc, (a, x)| acc + a * x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraintSet {
    pub n_holes: usize,
    pub rows: Vec<LinearRow>,
}

impl LinearConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    /// Margin added to strict comparisons: `lhs < rhs` becomes
    /// `lhs - rhs + strict_slack <= 0`. Zero compiles strict as non-strict.
    pub strict_slack: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { strict_slack: 0.0 }
    }
}

fn difference(atom: &ConstraintAtom, n_holes: usize) -> Result<Affine, NonAffineAtom> {
    let err = || NonAffineAtom {
        label: atom.label.clone(),
    };
    if atom.lhs.has_counters() || atom.rhs.has_counters() {
        return Err(err());
    }
    let mut d = atom.lhs.to_affine(&[], n_holes).map_err(|_| err())?;
    d.add_assign(
        &atom
            .rhs
            .to_affine(&[], n_holes)
            .map_err(|_| err())?
            .scaled(-1.0),
    );
    Ok(d)
}

pub fn compile(
    c: &SymbolicConstraint,
    n_holes: usize,
) -> Result<LinearConstraintSet, NonAffineAtom> {
    compile_with(c, n_holes, CompileOptions::default())
}

pub fn compile_with(
    c: &SymbolicConstraint,
    n_holes: usize,
    opts: CompileOptions,
) -> Result<LinearConstraintSet, NonAffineAtom> {
    let mut rows = Vec::new();
    for (i, atom) in c.atoms.iter().enumerate() {
        let d = difference(atom, n_holes)?;
        let row = |a: Affine, slack: f64| LinearRow {
            coeffs: a.coeffs,
            offset: a.constant + slack,
            atom: i,
        };
        match atom.op {
            CmpOp::Le => rows.push(row(d, 0.0)),
            CmpOp::Lt => rows.push(row(d, opts.strict_slack)),
            CmpOp::Ge => rows.push(row(d.scaled(-1.0), 0.0)),
            CmpOp::Gt => rows.push(row(d.scaled(-1.0), opts.strict_slack)),
            CmpOp::Eq => {
                rows.push(row(d.clone(), 0.0));
                rows.push(row(d.scaled(-1.0), 0.0));
            }
        }
    }
    Ok(LinearConstraintSet { n_holes, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SatisfactionCheck {
    pub satisfied: bool,
    /// `u_i(h)` for every row.
    pub residuals: Vec<f64>,
}

impl SatisfactionCheck {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `true` iff `max_i u_i(h) <= 0`. An empty set is always satisfied.
pub fn satisfied(lcs: &LinearConstraintSet, h: &HoleAssignment) -> SatisfactionCheck {
    let residuals: Vec<f64> = lcs.rows.iter().map(|r| r.residual(h.values())).collect();
    let satisfied = residuals.iter().all(|u| *u <= 0.0);
    SatisfactionCheck {
        satisfied,
        residuals,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Relaxed constraint loss and its gradient with respect to `h`.
///
/// Each row contributes `-ln(1 - sigmoid(relu(u)))`, i.e. `softplus(relu(u))`.
/// At or below zero the loss is `ln 2` and the relu subgradient is 0.
pub fn penalty(lcs: &LinearConstraintSet, h: &HoleAssignment) -> (f64, Vec<f64>) {
    let hv = h.values();
    let mut loss = 0.0;
    let mut grad = vec![0.0; lcs.n_holes];
    for row in &lcs.rows {
        let u = row.residual(hv);
        let z = u.max(0.0);
        loss += softplus(z);
        if u > 0.0 {
            let s = sigmoid(z);
            for (g, a) in grad.iter_mut().zip(&row.coeffs) {
                *g += s * a;
            }
        }
    }
    (loss, grad)
}

/// Failed atoms of a concretization attempt.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct ConstraintViolation {
    pub violated: Vec<ViolatedAtom>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolatedAtom {
    pub label: String,
    pub residual: f64,
}

impl ConstraintViolation {
    pub fn from_check(
        c: &SymbolicConstraint,
        lcs: &LinearConstraintSet,
        check: &SatisfactionCheck,
    ) -> Self {
        let mut violated: Vec<ViolatedAtom> = Vec::new();
        for (row, u) in lcs.rows.iter().zip(&check.residuals) {
            if *u <= 0.0 {
                continue;
            }
            let label = &c.atoms[row.atom].label;
            match violated.iter_mut().find(|v| v.label == *label) {
                Some(v) => v.residual = v.residual.max(*u),
                None => violated.push(ViolatedAtom {
                    label: label.clone(),
                    residual: *u,
                }),
            }
        }
        Self { violated }
    }
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("constraint violated:")?;
        for v in &self.violated {
            write!(f, " {} (u = {})", v.label, v.residual)?;
        }
        Ok(())
    }
}
