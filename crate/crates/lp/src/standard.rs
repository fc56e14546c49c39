//! Equality-plus-bounds standard form `V·y = w, lb ≤ y ≤ ub`.
//!
//! Every model constraint becomes one row. Inequalities get a nonnegative
//! slack column (`+s` for `≤`, `−s` for `≥`), so the dual of each row is the
//! dual of the originating constraint with no sign flip.

use crate::error::ModelError;
use crate::model::{ConId, Model, Sense, VarId, VarKind};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnOrigin {
    Variable(VarId),
    Slack(ConId),
}

#[derive(Debug, Clone)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub v: CscMatrix,
    pub w: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// Constant part of the objective.
    pub obj_offset: f64,
    /// Origin of each column.
    pub columns: Vec<ColumnOrigin>,
    /// Column of each model variable.
    pub var_col: Vec<usize>,
    /// Slack column of each model constraint (`None` for equalities).
    pub slack_col: Vec<Option<usize>>,
}

/// Standard form of a continuous model. Binary variables are rejected.
pub fn standard_form(model: &Model) -> Result<StandardLp, ModelError> {
    if let Some(v) = model.variables().iter().find(|v| v.kind == VarKind::Binary) {
        return Err(ModelError::BinaryInStandardForm(v.name.clone()));
    }
    Ok(build(model))
}

/// Standard form of the continuous relaxation: binaries become `[lb, ub]`
/// continuous columns.
pub fn relaxed_standard_form(model: &Model) -> StandardLp {
    build(model)
}

fn build(model: &Model) -> StandardLp {
    let n_vars = model.num_vars();
    let n_rows = model.num_constraints();
    let n_slacks = model.constraints().iter().filter(|c| c.sense != Sense::Eq).count();
    let ncols = n_vars + n_slacks;

    let mut c = vec![0.0; ncols];
    for &(v, coef) in model.objective().terms() {
        c[v.0] = coef;
    }
    let mut lb = Vec::with_capacity(ncols);
    let mut ub = Vec::with_capacity(ncols);
    let mut columns = Vec::with_capacity(ncols);
    for (i, v) in model.variables().iter().enumerate() {
        lb.push(v.lb);
        ub.push(v.ub);
        columns.push(ColumnOrigin::Variable(VarId(i)));
    }

    let nnz: usize = model.constraints().iter().map(|c| c.expr.terms().len() + 1).sum();
    let mut trip = Vec::with_capacity(nnz);
    let mut w = Vec::with_capacity(n_rows);
    let mut slack_col = Vec::with_capacity(n_rows);
    let mut next_slack = n_vars;
    for (row, con) in model.constraints().iter().enumerate() {
        for &(v, coef) in con.expr.terms() {
            trip.push((row, v.0, coef));
        }
        w.push(con.rhs);
        match con.sense {
            Sense::Eq => slack_col.push(None),
            Sense::Le | Sense::Ge => {
                let sign = if con.sense == Sense::Le { 1.0 } else { -1.0 };
                trip.push((row, next_slack, sign));
                lb.push(0.0);
                ub.push(f64::INFINITY);
                columns.push(ColumnOrigin::Slack(ConId(row)));
                slack_col.push(Some(next_slack));
                next_slack += 1;
            }
        }
    }

    StandardLp {
        c,
        v: CscMatrix::from_triplets(n_rows, ncols, &trip),
        w,
        lb,
        ub,
        obj_offset: model.objective().constant_term(),
        columns,
        var_col: (0..n_vars).collect(),
        slack_col,
    }
}

impl StandardLp {
    pub fn num_rows(&self) -> usize {
        self.w.len()
    }

    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    /// Extends a model point with the slack values that make every row tight.
    pub fn extend_point(&self, model: &Model, point: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.num_cols()];
        for (i, &col) in self.var_col.iter().enumerate() {
            y[col] = point[i];
        }
        for (row, con) in model.constraints().iter().enumerate() {
            if let Some(col) = self.slack_col[row] {
                let lhs = con.expr.evaluate(point);
                y[col] = match con.sense {
                    Sense::Le => con.rhs - lhs,
                    Sense::Ge => lhs - con.rhs,
                    Sense::Eq => unreachable!(),
                };
            }
        }
        y
    }

    /// Projects a standard-form point back onto the model variables.
    pub fn restrict_point(&self, y: &[f64]) -> Vec<f64> {
        self.var_col.iter().map(|&col| y[col]).collect()
    }

    /// Largest violation of `V·y = w` and the bounds.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let r = self.v.mul_vec(y);
        let mut worst: f64 = 0.0;
        for (ri, wi) in r.iter().zip(&self.w) {
            worst = worst.max((ri - wi).abs());
        }
        for ((&x, &l), &u) in y.iter().zip(&self.lb).zip(&self.ub) {
            worst = worst.max(l - x).max(x - u);
        }
        worst
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.obj_offset + self.c.iter().zip(y).map(|(c, y)| c * y).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;

    #[test]
    fn single_inequality_gets_slack() {
        let mut m = Model::new();
        let x = m.continuous("x", 0.0, f64::INFINITY).unwrap();
        m.add_constraint(LinExpr::from(x), Sense::Le, 5.0, "c").unwrap();
        let s = standard_form(&m).unwrap();
        assert_eq!(s.v.to_dense(), vec![vec![1.0, 1.0]]);
        assert_eq!(s.w, vec![5.0]);
        assert_eq!((s.lb[1], s.ub[1]), (0.0, f64::INFINITY));
    }

    #[test]
    fn equality_keeps_bounds() {
        let mut m = Model::new();
        let x = m.continuous("x", 0.0, 1.0).unwrap();
        let y = m.continuous("y", 0.0, f64::INFINITY).unwrap();
        m.add_constraint(LinExpr::from(x) + LinExpr::from(y), Sense::Eq, 2.0, "c").unwrap();
        let s = standard_form(&m).unwrap();
        assert_eq!(s.v.to_dense(), vec![vec![1.0, 1.0]]);
        assert_eq!(s.w, vec![2.0]);
        assert_eq!((s.lb[0], s.ub[0]), (0.0, 1.0));
        assert_eq!(s.num_cols(), 2);
    }

    #[test]
    fn binary_rejected() {
        let mut m = Model::new();
        m.binary("z").unwrap();
        assert!(matches!(standard_form(&m), Err(ModelError::BinaryInStandardForm(_))));
        assert_eq!(relaxed_standard_form(&m).num_cols(), 1);
    }
}
