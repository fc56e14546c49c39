//! Algebraic model: variables, linear expressions, constraints and a
//! minimization objective.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::ModelError;

/// Handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Handle to a model constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ConId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Sparse linear expression `Σ coef·var + constant`.
///
/// Terms are kept sorted by variable id with duplicates merged and zero
/// coefficients dropped, so two expressions built in different orders
/// compare equal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: value }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        let mut e = LinExpr::new();
        e.add_term(var, coef);
        e
    }

    pub fn from_terms<I: IntoIterator<Item = (VarId, f64)>>(terms: I) -> Self {
        let mut raw: Vec<(VarId, f64)> = terms.into_iter().collect();
        raw.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(raw.len());
        for (v, c) in raw {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        LinExpr { terms: out, constant: 0.0 }
    }

    /// Adds `coef·var`, merging with an existing term for `var`.
    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        match self.terms.binary_search_by_key(&var, |t| t.0) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => {
                if coef != 0.0 {
                    self.terms.insert(pos, (var, coef));
                }
            }
        }
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// Adds `scale·other` to this expression.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        if scale == 0.0 {
            return self;
        }
        // merge of two sorted lists
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = j >= other.terms.len()
                || (i < self.terms.len() && self.terms[i].0 < other.terms[j].0);
            let take_right = i >= self.terms.len()
                || (j < other.terms.len() && other.terms[j].0 < self.terms[i].0);
            if take_left {
                merged.push(self.terms[i]);
                i += 1;
            } else if take_right {
                merged.push((other.terms[j].0, scale * other.terms[j].1));
                j += 1;
            } else {
                let c = self.terms[i].1 + scale * other.terms[j].1;
                if c != 0.0 {
                    merged.push((self.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        self.terms = merged;
        self.constant += scale * other.constant;
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, var: VarId) -> f64 {
        self.terms
            .binary_search_by_key(&var, |t| t.0)
            .map(|p| self.terms[p].1)
            .unwrap_or(0.0)
    }

    /// Evaluates the expression at `point` (indexed by variable id).
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        // Neumaier summation keeps the result independent of cancellation
        // order for well-scaled data.
        let mut sum = self.constant;
        let mut comp = 0.0;
        for &(v, c) in &self.terms {
            let x = c * point[v.0];
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.add_scaled(&rhs, 1.0);
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        if rhs == 0.0 {
            return LinExpr::new();
        }
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

/// A linear constraint `expr sense rhs`. The expression never carries a
/// constant: `Model::add_constraint` folds it into the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub dual_tag: Option<String>,
}

/// A minimization model over continuous and binary variables.
#[derive(Debug, Clone, Default)]
pub struct Model {
    vars: Vec<Variable>,
    var_index: HashMap<String, VarId>,
    cons: Vec<Constraint>,
    con_index: HashMap<String, ConId>,
    objective: LinExpr,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.var_index.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        let (lb, ub) = match kind {
            VarKind::Binary => {
                if lb < 0.0 || ub > 1.0 || lb > ub || lb.is_nan() || ub.is_nan() {
                    return Err(ModelError::InvalidBounds { name, lb, ub });
                }
                (lb.ceil(), ub.floor())
            }
            VarKind::Continuous => {
                if lb.is_nan() || ub.is_nan() || lb > ub || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
                    return Err(ModelError::InvalidBounds { name, lb, ub });
                }
                (lb, ub)
            }
        };
        let id = VarId(self.vars.len());
        self.var_index.insert(name.clone(), id);
        self.vars.push(Variable { name, kind, lb, ub });
        Ok(id)
    }

    /// Shorthand for a continuous variable.
    pub fn continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> Result<VarId, ModelError> {
        self.add_variable(name, VarKind::Continuous, lb, ub)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<ConId, ModelError> {
        self.add_tagged_constraint(expr, sense, rhs, name, None)
    }

    pub fn add_tagged_constraint(
        &mut self,
        mut expr: LinExpr,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
        dual_tag: Option<String>,
    ) -> Result<ConId, ModelError> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(name));
        }
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(ModelError::UnknownVariable(v.0));
        }
        if expr.terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient(name));
        }
        if self.con_index.contains_key(&name) {
            return Err(ModelError::DuplicateConstraint(name));
        }
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        let id = ConId(self.cons.len());
        self.con_index.insert(name.clone(), id);
        self.cons.push(Constraint { name, expr, sense, rhs, dual_tag });
        Ok(id)
    }

    pub fn set_objective(&mut self, expr: LinExpr) -> Result<(), ModelError> {
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(ModelError::UnknownVariable(v.0));
        }
        self.objective = expr;
        Ok(())
    }

    /// Adds `expr` to the current objective.
    pub fn add_to_objective(&mut self, expr: &LinExpr) -> Result<(), ModelError> {
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(ModelError::UnknownVariable(v.0));
        }
        self.objective.add_scaled(expr, 1.0);
        Ok(())
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn constraint(&self, id: ConId) -> &Constraint {
        &self.cons[id.0]
    }

    pub fn con_by_name(&self, name: &str) -> Option<ConId> {
        self.con_index.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Tightens the bounds of an existing variable (used for scenario
    /// fixings). Binary bounds are rounded inward.
    pub fn set_bounds(&mut self, id: VarId, lb: f64, ub: f64) -> Result<(), ModelError> {
        let var = self.vars.get_mut(id.0).ok_or(ModelError::UnknownVariable(id.0))?;
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(ModelError::InvalidBounds { name: var.name.clone(), lb, ub });
        }
        match var.kind {
            VarKind::Binary => {
                var.lb = lb.max(0.0).ceil();
                var.ub = ub.min(1.0).floor();
            }
            VarKind::Continuous => {
                var.lb = lb;
                var.ub = ub;
            }
        }
        Ok(())
    }

    pub fn fix(&mut self, id: VarId, value: f64) -> Result<(), ModelError> {
        self.set_bounds(id, value, value)
    }

    pub fn set_rhs(&mut self, id: ConId, rhs: f64) -> Result<(), ModelError> {
        let con = &mut self.cons[id.0];
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(con.name.clone()));
        }
        con.rhs = rhs;
        Ok(())
    }

    /// Largest violation of any constraint or bound at `point`, plus the
    /// integrality violation of binaries.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(point) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.cons {
            let lhs = c.expr.evaluate(point);
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model: {} vars ({} binary), {} constraints",
            self.num_vars(),
            self.num_binaries(),
            self.num_constraints()
        )
    }
}
