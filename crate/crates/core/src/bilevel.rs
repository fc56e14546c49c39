//! Single-level reformulation of the planner/investor problem.
//!
//! The investor LP `min (c + Bᵀx)ᵀy s.t. V·y = w, y̲ ≤ y ≤ ȳ` is replaced by
//! its KKT conditions:
//!
//! ```text
//! c + Bᵀx − Vᵀλ + μ̄ − μ̲ = 0,   μ̄, μ̲ ≥ 0,
//! μ̲ ⊥ (y − y̲),   μ̄ ⊥ (ȳ − y)
//! ```
//!
//! With this orientation λ is the marginal cost of serving one more unit of
//! the row's right-hand side, and an export strictly inside its bounds has
//! `λ = b·x^λ`. Complementarity uses big-M binaries. Rows whose columns are
//! all fixed, and fixed columns that only touch such rows, are left out:
//! their duals are arbitrary and their contribution to the payment
//! linearization cancels exactly.

use nwa_lp::{solve_lp, ConId, LinExpr, Model, ModelError, Sense, Status, VarId};
use thiserror::Error;

use crate::investor::LowerLevelForm;

#[derive(Debug, Error)]
pub enum BilevelError {
    #[error("column `{0}` has an infinite bound")]
    InfiniteBound(String),
    #[error("big-M for column `{0}` must be positive")]
    BadBigM(String),
    #[error("export columns have different balance coefficients")]
    HeterogeneousExport,
    #[error("{0} price variables supplied, lower level needs {1}")]
    PriceCount(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] nwa_lp::SolveError),
    #[error("no multipliers found for the given response ({0:?})")]
    NoDuals(nwa_lp::Status),
}

/// Lower-level primal columns embedded in the single-level model.
#[derive(Debug, Clone)]
pub struct LowerLevelVars {
    pub y: Vec<VarId>,
    pub rows: Vec<ConId>,
}

/// Adds the investor columns with their bounds and the rows `V·y = w`.
pub fn embed_primal(model: &mut Model, llf: &LowerLevelForm) -> Result<LowerLevelVars, ModelError> {
    let mut y = Vec::with_capacity(llf.num_cols());
    for k in 0..llf.num_cols() {
        y.push(model.continuous(llf.col_names[k].clone(), llf.lb[k], llf.ub[k])?);
    }
    let rows_t = llf.v.transpose();
    let mut rows = Vec::with_capacity(llf.num_rows());
    for i in 0..llf.num_rows() {
        let (cols, vals) = rows_t.col(i);
        let e = LinExpr::from_terms(cols.iter().zip(vals).map(|(&k, &a)| (y[k], a)));
        rows.push(model.add_tagged_constraint(e, Sense::Eq, llf.w[i], llf.row_names[i].clone(), Some("ll".into()))?);
    }
    Ok(LowerLevelVars { y, rows })
}

/// Big-M constants per column.
#[derive(Debug, Clone, PartialEq)]
pub struct BigM {
    pub dual: Vec<f64>,
    pub primal: Vec<f64>,
}

impl BigM {
    /// `M_dual = 10·(|c_k| + b·x̄)`, `M_primal = ȳ − y̲`.
    pub fn default_for(llf: &LowerLevelForm) -> BigM {
        let xb = llf.pwf * llf.price_cap;
        BigM {
            dual: llf.c.iter().map(|c| 10.0 * (c.abs() + xb)).collect(),
            primal: llf.lb.iter().zip(&llf.ub).map(|(l, u)| u - l).collect(),
        }
    }

    pub fn escalate(&self, factor: f64) -> BigM {
        BigM { dual: self.dual.iter().map(|m| m * factor).collect(), primal: self.primal.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct KktHandles {
    /// Dual of each lower-level row (`None` for left-out rows).
    pub lambda: Vec<Option<VarId>>,
    pub mu_up: Vec<Option<VarId>>,
    pub mu_lo: Vec<Option<VarId>>,
    /// Free multiplier `μ̄ − μ̲` of kept fixed columns.
    pub nu: Vec<Option<VarId>>,
    pub u_up: Vec<Option<VarId>>,
    pub u_lo: Vec<Option<VarId>>,
    /// Import/export exclusivity binary per `(bus position, t)`.
    pub exclusive: Vec<Vec<Option<VarId>>>,
    pub stationarity: Vec<Option<ConId>>,
    pub row_kept: Vec<bool>,
    pub col_kept: Vec<bool>,
    pub big_m: BigM,
}

fn fixed(llf: &LowerLevelForm, k: usize) -> bool {
    llf.lb[k] == llf.ub[k]
}

/// Rows with at least one free column, and the columns touching them.
fn kept_sets(llf: &LowerLevelForm) -> (Vec<bool>, Vec<bool>) {
    let mut row_kept = vec![false; llf.num_rows()];
    for k in 0..llf.num_cols() {
        if !fixed(llf, k) {
            let (rows, _) = llf.v.col(k);
            for &i in rows {
                row_kept[i] = true;
            }
        }
    }
    let col_kept = (0..llf.num_cols())
        .map(|k| {
            let (rows, _) = llf.v.col(k);
            !fixed(llf, k) || rows.iter().any(|&i| row_kept[i]) || (llf.coupling[k].is_some() && llf.lb[k] != 0.0)
        })
        .collect();
    (row_kept, col_kept)
}

/// Adds stationarity, dual feasibility and big-M complementarity for the
/// lower level, plus import/export exclusivity. `prices` are the planner's
/// price variables in the order of `llf.prices`.
pub fn kkt_reformulate(
    model: &mut Model,
    llf: &LowerLevelForm,
    ll: &LowerLevelVars,
    prices: &[VarId],
    big_m: &BigM,
) -> Result<KktHandles, BilevelError> {
    let n = llf.num_cols();
    if prices.len() != llf.num_prices() {
        return Err(BilevelError::PriceCount(prices.len(), llf.num_prices()));
    }
    for k in 0..n {
        if !llf.lb[k].is_finite() || !llf.ub[k].is_finite() {
            return Err(BilevelError::InfiniteBound(llf.col_names[k].clone()));
        }
        if !(big_m.dual[k] > 0.0) || big_m.primal[k] < 0.0 {
            return Err(BilevelError::BadBigM(llf.col_names[k].clone()));
        }
    }
    let (row_kept, col_kept) = kept_sets(llf);
    let inf = f64::INFINITY;

    let mut lambda = vec![None; llf.num_rows()];
    for i in 0..llf.num_rows() {
        if row_kept[i] {
            lambda[i] = Some(model.continuous(format!("lam_{}", llf.row_names[i]), -inf, inf)?);
        }
    }
    let mut mu_up = vec![None; n];
    let mut mu_lo = vec![None; n];
    let mut nu = vec![None; n];
    let mut u_up = vec![None; n];
    let mut u_lo = vec![None; n];
    let mut stationarity = vec![None; n];
    for k in 0..n {
        if !col_kept[k] {
            continue;
        }
        let name = &llf.col_names[k];
        let mut e = LinExpr::constant(llf.c[k]);
        if let Some((i, coef)) = llf.coupling[k] {
            e.add_term(prices[i], coef);
        }
        let (rows, vals) = llf.v.col(k);
        for (&i, &a) in rows.iter().zip(vals) {
            if let Some(l) = lambda[i] {
                e.add_term(l, -a);
            }
        }
        if fixed(llf, k) {
            let v = model.continuous(format!("nu_{name}"), -inf, inf)?;
            e.add_term(v, 1.0);
            nu[k] = Some(v);
        } else {
            let m = big_m.dual[k];
            let mp = big_m.primal[k];
            let hi = model.continuous(format!("muup_{name}"), 0.0, m)?;
            let lo = model.continuous(format!("mulo_{name}"), 0.0, m)?;
            let bu = model.binary(format!("uup_{name}"))?;
            let bl = model.binary(format!("ulo_{name}"))?;
            e.add_term(hi, 1.0);
            e.add_term(lo, -1.0);
            model.add_constraint(LinExpr::from_terms([(hi, 1.0), (bu, -m)]), Sense::Le, 0.0, format!("cmu_up_{name}"))?;
            model.add_constraint(LinExpr::from_terms([(lo, 1.0), (bl, -m)]), Sense::Le, 0.0, format!("cmu_lo_{name}"))?;
            // ȳ − y ≤ M(1 − ū)  and  y − y̲ ≤ M(1 − u̲)
            model.add_constraint(
                LinExpr::from_terms([(ll.y[k], -1.0), (bu, mp)]),
                Sense::Le,
                mp - llf.ub[k],
                format!("csl_up_{name}"),
            )?;
            model.add_constraint(
                LinExpr::from_terms([(ll.y[k], 1.0), (bl, mp)]),
                Sense::Le,
                mp + llf.lb[k],
                format!("csl_lo_{name}"),
            )?;
            model.add_constraint(LinExpr::from_terms([(bu, 1.0), (bl, 1.0)]), Sense::Le, 1.0, format!("cone_{name}"))?;
            mu_up[k] = Some(hi);
            mu_lo[k] = Some(lo);
            u_up[k] = Some(bu);
            u_lo[k] = Some(bl);
        }
        let c0 = e.constant_term();
        let mut e = e;
        e.add_constant(-c0);
        stationarity[k] = Some(model.add_constraint(e, Sense::Eq, -c0, format!("stat_{name}"))?);
    }

    // import ⊥ export
    let mut exclusive = vec![vec![None; llf.steps]; llf.buses.len()];
    for b in 0..llf.buses.len() {
        for t in 0..llf.steps {
            let (imp, exp) = (llf.imp_col[b][t], llf.exp_col[b][t]);
            if llf.ub[imp] == 0.0 || llf.ub[exp] == 0.0 {
                continue;
            }
            let tag = &llf.col_names[exp][5..];
            let e_var = model.binary(format!("eie_{tag}"))?;
            model.add_constraint(
                LinExpr::from_terms([(ll.y[imp], 1.0), (e_var, -llf.ub[imp])]),
                Sense::Le,
                0.0,
                format!("cie_imp_{tag}"),
            )?;
            model.add_constraint(
                LinExpr::from_terms([(ll.y[exp], 1.0), (e_var, llf.ub[exp])]),
                Sense::Le,
                llf.ub[exp],
                format!("cie_exp_{tag}"),
            )?;
            exclusive[b][t] = Some(e_var);
        }
    }

    Ok(KktHandles {
        lambda,
        mu_up,
        mu_lo,
        nu,
        u_up,
        u_lo,
        exclusive,
        stationarity,
        row_kept,
        col_kept,
        big_m: big_m.clone(),
    })
}

/// `Σ λ·y^EXP = (1/V_yEXP)(wᵀλ − cᵀy − μ̄ᵀȳ + μ̲ᵀy̲)` as a linear expression
/// in the single-level variables.
pub fn linearized_payment(llf: &LowerLevelForm, ll: &LowerLevelVars, kkt: &KktHandles) -> Result<LinExpr, BilevelError> {
    let v_exp = export_coefficient(llf)?;
    let mut e = LinExpr::new();
    for i in 0..llf.num_rows() {
        if let Some(l) = kkt.lambda[i] {
            e.add_term(l, llf.w[i]);
        }
    }
    for k in 0..llf.num_cols() {
        if !kkt.col_kept[k] {
            continue;
        }
        e.add_term(ll.y[k], -llf.c[k]);
        if let Some(v) = kkt.nu[k] {
            e.add_term(v, -llf.ub[k]);
        }
        if let Some(m) = kkt.mu_up[k] {
            e.add_term(m, -llf.ub[k]);
        }
        if let Some(m) = kkt.mu_lo[k] {
            e.add_term(m, llf.lb[k]);
        }
    }
    let mut out = LinExpr::new();
    out.add_scaled(&e, 1.0 / v_exp);
    Ok(out)
}

fn export_coefficient(llf: &LowerLevelForm) -> Result<f64, BilevelError> {
    for cols in &llf.exp_col {
        for &k in cols {
            let (rows, vals) = llf.v.col(k);
            let bal: Vec<f64> = rows
                .iter()
                .zip(vals)
                .filter(|(i, _)| matches!(llf.row_roles[**i], crate::investor::RowRole::Balance { .. }))
                .map(|(_, v)| *v)
                .collect();
            if bal.len() != 1 || bal[0] != llf.v_exp {
                return Err(BilevelError::HeterogeneousExport);
            }
        }
    }
    Ok(llf.v_exp)
}

/// Lower-level duals in full, with left-out rows and columns completed.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVars {
    pub lambda: Vec<f64>,
    pub mu_up: Vec<f64>,
    pub mu_lo: Vec<f64>,
}

/// Reads the duals from a single-level point. Left-out rows get λ = 0 and
/// the multipliers of fixed columns absorb the stationarity residual.
pub fn extract_duals(llf: &LowerLevelForm, kkt: &KktHandles, point: &[f64], x: &[f64]) -> DualVars {
    let lambda: Vec<f64> = kkt.lambda.iter().map(|l| l.map_or(0.0, |v| point[v.0])).collect();
    let g = llf.gradient(x);
    let vt_lambda = llf.v.tr_mul_vec(&lambda);
    let n = llf.num_cols();
    let mut mu_up = vec![0.0; n];
    let mut mu_lo = vec![0.0; n];
    for k in 0..n {
        match (kkt.mu_up[k], kkt.mu_lo[k]) {
            (Some(hi), Some(lo)) => {
                mu_up[k] = point[hi.0];
                mu_lo[k] = point[lo.0];
            }
            _ => {
                let r = g[k] - vt_lambda[k];
                mu_lo[k] = r.max(0.0);
                mu_up[k] = (-r).max(0.0);
            }
        }
    }
    DualVars { lambda, mu_up, mu_lo }
}

/// Multipliers that certify a given response `y` at prices `x`: bound
/// multipliers are only allowed where `y` sits at that bound, and the
/// stationarity residual is minimized in the 1-norm. For an optimal `y` the
/// residual is zero and complementarity holds exactly.
pub fn duals_for_response(llf: &LowerLevelForm, y: &[f64], x: &[f64]) -> Result<DualVars, BilevelError> {
    let mut m = Model::new();
    let inf = f64::INFINITY;
    let lambda: Vec<VarId> =
        (0..llf.num_rows()).map(|i| m.continuous(format!("lam_{i}"), -inf, inf)).collect::<Result<_, _>>()?;
    let g = llf.gradient(x);
    let mut mus = Vec::with_capacity(llf.num_cols());
    let mut residual = LinExpr::new();
    for k in 0..llf.num_cols() {
        let band = 1e-7 * (1.0 + (llf.ub[k] - llf.lb[k]).abs());
        let at_ub = y[k] >= llf.ub[k] - band;
        let at_lb = y[k] <= llf.lb[k] + band;
        let up = m.continuous(format!("muup_{k}"), 0.0, if at_ub { inf } else { 0.0 })?;
        let lo = m.continuous(format!("mulo_{k}"), 0.0, if at_lb { inf } else { 0.0 })?;
        let rp = m.continuous(format!("rp_{k}"), 0.0, inf)?;
        let rn = m.continuous(format!("rn_{k}"), 0.0, inf)?;
        let mut e = LinExpr::from_terms([(up, 1.0), (lo, -1.0), (rp, 1.0), (rn, -1.0)]);
        let (rows, vals) = llf.v.col(k);
        for (&i, &v) in rows.iter().zip(vals) {
            e.add_term(lambda[i], -v);
        }
        m.add_constraint(e, Sense::Eq, -g[k], format!("stat_{k}"))?;
        residual.add_term(rp, 1.0).add_term(rn, 1.0);
        mus.push((up, lo));
    }
    m.set_objective(residual)?;
    let sol = solve_lp(&m)?;
    if sol.status != Status::Optimal {
        return Err(BilevelError::NoDuals(sol.status));
    }
    Ok(DualVars {
        lambda: lambda.iter().map(|v| sol.primal[v.0]).collect(),
        mu_up: mus.iter().map(|(u, _)| sol.primal[u.0]).collect(),
        mu_lo: mus.iter().map(|(_, l)| sol.primal[l.0]).collect(),
    })
}

/// Σ λ·y^EXP evaluated directly.
pub fn payment_direct(llf: &LowerLevelForm, y: &[f64], duals: &DualVars) -> f64 {
    llf.payment_direct(y, &duals.lambda)
}

/// Evaluates the linearized form from full dual vectors.
pub fn payment_linearized(llf: &LowerLevelForm, y: &[f64], duals: &DualVars) -> f64 {
    let mut s = 0.0;
    for i in 0..llf.num_rows() {
        s += llf.w[i] * duals.lambda[i];
    }
    for k in 0..llf.num_cols() {
        s += -llf.c[k] * y[k] - duals.mu_up[k] * llf.ub[k] + duals.mu_lo[k] * llf.lb[k];
    }
    s / llf.v_exp
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceEntry {
    pub bus: usize,
    pub t: usize,
    pub x: f64,
    pub lambda: f64,
    /// Export strictly between its bounds.
    pub interior: bool,
    pub residual: f64,
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSignal {
    pub entries: Vec<PriceEntry>,
    pub max_interior_residual: f64,
    pub mismatches: usize,
    pub interior_count: usize,
}

impl PriceSignal {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.x).collect()
    }
}

/// Reads `x^λ` and cross-checks `λ = b·x^λ` wherever the export is strictly
/// inside its bounds. Bound-binding entries are skipped.
pub fn recover_price_signal(llf: &LowerLevelForm, y: &[f64], x: &[f64], lambda: &[f64], tol: f64) -> PriceSignal {
    let mut entries = Vec::with_capacity(llf.num_prices());
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut interior_count = 0;
    for (b, &j) in llf.buses.iter().enumerate() {
        for t in 0..llf.steps {
            let k = llf.exp_col[b][t];
            let i = llf.price_of[b][t];
            let l = lambda[llf.bal_row[b][t]];
            let band = 1e-7 * (1.0 + llf.ub[k].abs());
            let interior = y[k] > llf.lb[k] + band && y[k] < llf.ub[k] - band;
            let residual = (l - llf.pwf * x[i]).abs();
            let mismatch = interior && residual > tol * (1.0 + l.abs());
            if interior {
                interior_count += 1;
                worst = worst.max(residual / (1.0 + l.abs()));
            }
            if mismatch {
                mismatches += 1;
            }
            entries.push(PriceEntry { bus: j, t, x: x[i], lambda: l, interior, residual, mismatch });
        }
    }
    PriceSignal { entries, max_interior_residual: worst, mismatches, interior_count }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
    pub stationarity_ok: bool,
    pub primal_ok: bool,
    pub dual_sign_ok: bool,
    pub complementarity_ok: bool,
    pub pass: bool,
}

/// Residuals of every KKT condition at `(y, x, duals)`.
pub fn verify_kkt(llf: &LowerLevelForm, y: &[f64], x: &[f64], duals: &DualVars, tol: f64) -> KktReport {
    let g = llf.gradient(x);
    let vt = llf.v.tr_mul_vec(&duals.lambda);
    let mut stat: f64 = 0.0;
    let mut sign: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for k in 0..llf.num_cols() {
        let r = g[k] - vt[k] + duals.mu_up[k] - duals.mu_lo[k];
        stat = stat.max(r.abs());
        sign = sign.max(-duals.mu_up[k]).max(-duals.mu_lo[k]);
        comp = comp
            .max((duals.mu_up[k] * (llf.ub[k] - y[k])).abs())
            .max((duals.mu_lo[k] * (y[k] - llf.lb[k])).abs());
    }
    let primal = llf.max_violation(y);
    let (so, po, dso, co) = (stat <= tol, primal <= tol, sign <= tol, comp <= tol);
    KktReport {
        stationarity: stat,
        primal,
        dual_sign: sign,
        complementarity: comp,
        stationarity_ok: so,
        primal_ok: po,
        dual_sign_ok: dso,
        complementarity_ok: co,
        pass: so && po && dso && co,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaymentReport {
    /// `(a/b)·Σλ·y^EXP` as carried by the planner objective.
    pub planner_payment: f64,
    /// `a·Σ x^λ·y^EXP`.
    pub planner_direct: f64,
    /// `b·Σ x^λ·y^EXP`.
    pub investor_income: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

/// Zero-sum check: the planner pays `a/b` times what the investor earns.
pub fn verify_payment_identity(
    llf: &LowerLevelForm,
    y: &[f64],
    x: &[f64],
    linearized: f64,
    a: f64,
    b: f64,
    tol: f64,
) -> PaymentReport {
    let mut sxy = 0.0;
    for (bi, cols) in llf.exp_col.iter().enumerate() {
        for (t, &k) in cols.iter().enumerate() {
            sxy += x[llf.price_of[bi][t]] * y[k];
        }
    }
    let planner_payment = a / b * linearized;
    let planner_direct = a * sxy;
    let investor_income = b * sxy;
    let scale = planner_payment.abs().max(planner_direct.abs()).max(1.0);
    let relative_gap = (planner_payment - planner_direct).abs() / scale;
    PaymentReport { planner_payment, planner_direct, investor_income, relative_gap, pass: relative_gap <= tol }
}

/// Dual multipliers sitting at their big-M cap (M too small).
pub fn binding_big_m(kkt: &KktHandles, point: &[f64]) -> usize {
    let mut count = 0;
    for k in 0..kkt.mu_up.len() {
        for mu in [kkt.mu_up[k], kkt.mu_lo[k]].into_iter().flatten() {
            if point[mu.0] >= kkt.big_m.dual[k] * (1.0 - 1e-6) {
                count += 1;
            }
        }
    }
    count
}
