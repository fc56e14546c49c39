//! Lower-level DER investor LP.
//!
//! Quantities are annualized: an hourly kWh at step `t` is multiplied by the
//! step weight (annual hours represented by the step), so `y^IMP`, `y^EXP`
//! and `y^DER` are kWh per year attributed to that step.
//!
//! Columns per DER bus: capacity `y^kW`, then per step import, export,
//! production and curtailment. Rows per bus and step:
//! `y^IMP − y^EXP + y^DER = d` (balance, dual λ) and
//! `y^DER + s − f·y^kW = 0` (production limit with curtailment slack `s`).

use nwa_lp::{simplex_with, ColumnOrigin, CscMatrix, SimplexOptions, SolveError, StandardLp, Status, VarId};
use thiserror::Error;

use crate::network::Case;
use crate::planner::pwf;

#[derive(Debug, Error)]
pub enum InvestorError {
    #[error("no DER candidate buses")]
    NoCandidates,
    #[error("DER bus {0} has no production factor")]
    MissingProduction(String),
    #[error("DER bus {0} has a nonpositive site cap")]
    BadSiteCap(String),
    #[error("lower level is {0}")]
    NotOptimal(Status),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Capacity { bus: usize },
    Import { bus: usize, t: usize },
    Export { bus: usize, t: usize },
    Der { bus: usize, t: usize },
    Curtail { bus: usize, t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    Balance { bus: usize, t: usize },
    Production { bus: usize, t: usize },
}

/// The investor LP `min (c + Bᵀx)ᵀy s.t. V·y = w, y̲ ≤ y ≤ ȳ` with the
/// coupling to the planner's price variables `x`.
#[derive(Debug, Clone)]
pub struct LowerLevelForm {
    pub c: Vec<f64>,
    pub v: CscMatrix,
    pub w: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// Per column: price index and coefficient of the coupling term.
    pub coupling: Vec<Option<(usize, f64)>>,
    pub roles: Vec<ColumnRole>,
    pub row_roles: Vec<RowRole>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    /// Coefficient of every export column in its balance row.
    pub v_exp: f64,
    /// `(bus, t)` of each price variable.
    pub prices: Vec<(usize, usize)>,
    pub pwf: f64,
    /// DER candidate buses in column order.
    pub buses: Vec<usize>,
    pub steps: usize,
    pub cap_col: Vec<usize>,
    pub imp_col: Vec<Vec<usize>>,
    pub exp_col: Vec<Vec<usize>>,
    pub der_col: Vec<Vec<usize>>,
    pub curt_col: Vec<Vec<usize>>,
    pub bal_row: Vec<Vec<usize>>,
    pub prod_row: Vec<Vec<usize>>,
    /// Price index of `(bus position, t)`.
    pub price_of: Vec<Vec<usize>>,
    pub price_cap: f64,
}

impl LowerLevelForm {
    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.w.len()
    }

    pub fn num_prices(&self) -> usize {
        self.prices.len()
    }

    /// Cost gradient at prices `x`: `c + Bᵀx`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.c
            .iter()
            .zip(&self.coupling)
            .map(|(&c, b)| match b {
                Some((i, coef)) => c + coef * x[*i],
                None => c,
            })
            .collect()
    }

    pub fn objective(&self, y: &[f64], x: &[f64]) -> f64 {
        self.gradient(x).iter().zip(y).map(|(g, y)| g * y).sum()
    }

    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let r = self.v.mul_vec(y);
        let mut worst: f64 = 0.0;
        for (ri, wi) in r.iter().zip(&self.w) {
            worst = worst.max((ri - wi).abs());
        }
        for k in 0..y.len() {
            worst = worst.max(self.lb[k] - y[k]).max(y[k] - self.ub[k]);
        }
        worst
    }

    /// Standard form of the LP at fixed prices.
    pub fn standard_lp(&self, x: &[f64]) -> StandardLp {
        let n = self.num_cols();
        StandardLp {
            c: self.gradient(x),
            v: self.v.clone(),
            w: self.w.clone(),
            lb: self.lb.clone(),
            ub: self.ub.clone(),
            obj_offset: 0.0,
            columns: (0..n).map(|k| ColumnOrigin::Variable(VarId(k))).collect(),
            var_col: (0..n).collect(),
            slack_col: vec![None; self.num_rows()],
        }
    }

    /// Solves the LP alone at prices `x`.
    pub fn solve_at(&self, x: &[f64]) -> Result<LowerLevelSolution, InvestorError> {
        let lp = self.standard_lp(x);
        let r = simplex_with(&lp, &SimplexOptions::default())?;
        if r.status != Status::Optimal {
            return Err(InvestorError::NotOptimal(r.status));
        }
        // stationarity g − Vᵀλ + μ̄ − μ̲ = 0 with reduced cost d = g − Vᵀλ
        let mu_up = r.reduced_costs.iter().map(|&d| (-d).max(0.0)).collect();
        let mu_lo = r.reduced_costs.iter().map(|&d| d.max(0.0)).collect();
        Ok(LowerLevelSolution { y: r.primal, lambda: r.dual, mu_up, mu_lo, objective: r.objective })
    }

    /// Σ λ·y^EXP over the balance rows.
    pub fn payment_direct(&self, y: &[f64], lambda: &[f64]) -> f64 {
        let mut s = 0.0;
        for (b, cols) in self.exp_col.iter().enumerate() {
            for (t, &k) in cols.iter().enumerate() {
                s += lambda[self.bal_row[b][t]] * y[k];
            }
        }
        s
    }

    /// Investor cost decomposition at `(y, x)`.
    pub fn result(&self, case: &Case, y: &[f64], x: &[f64]) -> InvestorResult {
        let ie = &case.economics.investor;
        let mut capex = 0.0;
        let mut om = 0.0;
        let mut energy = 0.0;
        let mut income = 0.0;
        let mut no_der = 0.0;
        let mut capacity = Vec::new();
        let mut exported = 0.0;
        for (b, &j) in self.buses.iter().enumerate() {
            let site = case.feeder.buses[j].der.as_ref().unwrap();
            let kw = y[self.cap_col[b]];
            capex += site.c_kw * kw;
            om += self.pwf * ie.c_om * kw;
            capacity.push((case.feeder.buses[j].id.clone(), kw));
            for t in 0..self.steps {
                energy += self.pwf * site.c_imp * y[self.imp_col[b][t]];
                no_der += self.pwf * site.c_imp * self.w[self.bal_row[b][t]];
                let e = y[self.exp_col[b][t]];
                exported += e;
                income += self.pwf * x[self.price_of[b][t]] * e;
            }
        }
        let net = capex + om + energy - income;
        InvestorResult {
            net_present_cost: net,
            capex,
            om,
            energy_cost: energy,
            income,
            savings: no_der - net,
            capacity_kw: capacity,
            exported_kwh: exported,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LowerLevelSolution {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu_up: Vec<f64>,
    pub mu_lo: Vec<f64>,
    pub objective: f64,
}

/// Present-worth investor economics.
#[derive(Debug, Clone, PartialEq)]
pub struct InvestorResult {
    pub net_present_cost: f64,
    pub capex: f64,
    pub om: f64,
    /// Discounted import purchases.
    pub energy_cost: f64,
    /// Discounted export income from the price signal.
    pub income: f64,
    /// Net present cost avoided relative to importing all demand.
    pub savings: f64,
    pub capacity_kw: Vec<(String, f64)>,
    /// Annual exported energy, kWh.
    pub exported_kwh: f64,
}

/// Builds the investor LP for every DER candidate bus of `case`.
pub fn build_investor_lp(case: &Case) -> Result<LowerLevelForm, InvestorError> {
    let f = &case.feeder;
    let s = &case.series;
    let ie = &case.economics.investor;
    let buses = f.der_buses();
    if buses.is_empty() {
        return Err(InvestorError::NoCandidates);
    }
    let pwf_ll = pwf(ie.r_e, ie.r_c, ie.ror, case.economics.planner.years);
    let h = s.step_weight();
    let steps = s.steps;

    let mut c = Vec::new();
    let mut lb = Vec::new();
    let mut ub = Vec::new();
    let mut coupling = Vec::new();
    let mut roles = Vec::new();
    let mut col_names = Vec::new();
    let mut trip = Vec::new();
    let mut w = Vec::new();
    let mut row_roles = Vec::new();
    let mut row_names = Vec::new();
    let mut prices = Vec::new();
    let nb = buses.len();
    let mut cap_col = vec![0; nb];
    let mut imp_col = vec![Vec::with_capacity(steps); nb];
    let mut exp_col = vec![Vec::with_capacity(steps); nb];
    let mut der_col = vec![Vec::with_capacity(steps); nb];
    let mut curt_col = vec![Vec::with_capacity(steps); nb];
    let mut bal_row = vec![Vec::with_capacity(steps); nb];
    let mut prod_row = vec![Vec::with_capacity(steps); nb];
    let mut price_of = vec![Vec::with_capacity(steps); nb];

    let mut col = |c_k: f64, lo: f64, hi: f64, b: Option<(usize, f64)>, role: ColumnRole, name: String| {
        c.push(c_k);
        lb.push(lo);
        ub.push(hi);
        coupling.push(b);
        roles.push(role);
        col_names.push(name);
        c.len() - 1
    };

    for (bi, &j) in buses.iter().enumerate() {
        let bus = &f.buses[j];
        let site = bus.der.as_ref().unwrap();
        let prod = &s.production[j];
        if prod.len() != steps {
            return Err(InvestorError::MissingProduction(bus.id.clone()));
        }
        if !(site.site_cap_kw > 0.0) {
            return Err(InvestorError::BadSiteCap(bus.id.clone()));
        }
        let cap = site.site_cap_kw;
        cap_col[bi] = col(
            site.c_kw + pwf_ll * ie.c_om,
            0.0,
            cap,
            None,
            ColumnRole::Capacity { bus: j },
            format!("ykw_{}", bus.id),
        );
        for t in 0..steps {
            let d = s.bus_load(j, t) * h;
            let gen_max = prod[t] * h * cap;
            let price = prices.len();
            prices.push((j, t));
            price_of[bi].push(price);
            let imp = col(
                pwf_ll * site.c_imp,
                (d - gen_max).max(0.0),
                d,
                None,
                ColumnRole::Import { bus: j, t },
                format!("yimp_{}_{t}", bus.id),
            );
            let exp = col(0.0, 0.0, gen_max, Some((price, -pwf_ll)), ColumnRole::Export { bus: j, t }, format!("yexp_{}_{t}", bus.id));
            let der = col(0.0, 0.0, gen_max, None, ColumnRole::Der { bus: j, t }, format!("yder_{}_{t}", bus.id));
            let curt = col(0.0, 0.0, gen_max, None, ColumnRole::Curtail { bus: j, t }, format!("ycurt_{}_{t}", bus.id));
            imp_col[bi].push(imp);
            exp_col[bi].push(exp);
            der_col[bi].push(der);
            curt_col[bi].push(curt);

            let r = w.len();
            trip.push((r, imp, 1.0));
            trip.push((r, exp, -1.0));
            trip.push((r, der, 1.0));
            w.push(d);
            row_roles.push(RowRole::Balance { bus: j, t });
            row_names.push(format!("bal_{}_{t}", bus.id));
            bal_row[bi].push(r);

            let r = w.len();
            trip.push((r, der, 1.0));
            trip.push((r, curt, 1.0));
            if prod[t] > 0.0 {
                trip.push((r, cap_col[bi], -prod[t] * h));
            }
            w.push(0.0);
            row_roles.push(RowRole::Production { bus: j, t });
            row_names.push(format!("prod_{}_{t}", bus.id));
            prod_row[bi].push(r);
        }
    }
    let v = CscMatrix::from_triplets(w.len(), c.len(), &trip);
    Ok(LowerLevelForm {
        c,
        v,
        w,
        lb,
        ub,
        coupling,
        roles,
        row_roles,
        col_names,
        row_names,
        v_exp: -1.0,
        prices,
        pwf: pwf_ll,
        buses,
        steps,
        cap_col,
        imp_col,
        exp_col,
        der_col,
        curt_col,
        bal_row,
        prod_row,
        price_of,
        price_cap: case.economics.planner.price_cap,
    })
}

/// Investor optimum without any price signal.
pub fn solve_no_signal(case: &Case) -> Result<(InvestorResult, LowerLevelSolution), InvestorError> {
    let llf = build_investor_lp(case)?;
    let x = vec![0.0; llf.num_prices()];
    let sol = llf.solve_at(&x)?;
    Ok((llf.result(case, &sol.y, &x), sol))
}
