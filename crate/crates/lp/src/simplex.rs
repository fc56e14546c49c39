//! Bounded-variable revised simplex over a sparse standard form.
//!
//! * Phase 1 minimizes the sum of bound infeasibilities of the basic
//!   variables (composite objective) starting from a basis of explicit
//!   artificial columns, one per row, fixed to `[0, 0]`; slack columns of
//!   inequality rows and a triangular crash replace artificials up front.
//! * Phase 2 runs primal simplex with Dantzig pricing and a Harris two-pass
//!   ratio test. After a run of degenerate pivots the entering/leaving choice
//!   falls back to Bland's rule, which guarantees termination.
//! * A dual simplex re-optimizes after bound changes (branch-and-bound);
//!   it falls back to the primal method whenever the starting basis is not
//!   dual feasible.
//!
//! The basis is held as a sparse LU factorization with product-form eta
//! updates, refactorized every `refactor_every` pivots.

use std::time::Instant;

use crate::error::SolveError;
use crate::lu::LuFactors;
use crate::solution::Status;
use crate::sparse::CscMatrix;
use crate::standard::StandardLp;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance, relative to `1 + |bound|`.
    pub feas_tol: f64,
    /// Reduced-cost (optimality) tolerance.
    pub opt_tol: f64,
    pub max_iterations: usize,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before Bland's rule is engaged.
    pub stall_threshold: usize,
    pub scale: bool,
    pub deadline: Option<Instant>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            max_iterations: 5_000_000,
            refactor_every: 50,
            stall_threshold: 200,
            scale: true,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: Status,
    /// Values of the standard-form columns.
    pub primal: Vec<f64>,
    /// One dual per equality row, `λ = B⁻ᵀ c_B`.
    pub dual: Vec<f64>,
    /// `c − Vᵀλ` per column.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl SimplexResult {
    /// Relative difference between the primal objective and the dual
    /// objective `wᵀλ + Σ d_j·x_j + offset` (nonzero reduced costs only occur
    /// at bounds, so the sum is the bound contribution).
    pub fn strong_duality_gap(&self, lp: &StandardLp) -> f64 {
        let dual_obj: f64 = lp.obj_offset
            + lp.w.iter().zip(&self.dual).map(|(w, y)| w * y).sum::<f64>()
            + self.reduced_costs.iter().zip(&self.primal).map(|(d, x)| d * x).sum::<f64>();
        (self.objective - dual_obj).abs() / self.objective.abs().max(1.0)
    }
}

/// Solves a standard-form LP with default options.
pub fn simplex(lp: &StandardLp) -> Result<SimplexResult, SolveError> {
    simplex_with(lp, &SimplexOptions::default())
}

pub fn simplex_with(lp: &StandardLp, opts: &SimplexOptions) -> Result<SimplexResult, SolveError> {
    let mut engine = Engine::new(lp, opts.clone())?;
    engine.solve_from_scratch()?;
    let r = engine.result(lp);
    if r.status == Status::Optimal {
        let gap = r.strong_duality_gap(lp);
        if gap > 1e-7 {
            log::warn!("strong duality audit: relative gap {gap:.3e}");
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

/// Saved basis for warm starts.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    basis: Vec<u32>,
    state: Vec<VarState>,
}

pub(crate) struct Engine {
    opts: SimplexOptions,
    m: usize,
    /// Structural (standard-form) columns; artificials follow at `n..n+m`.
    n: usize,
    a: CscMatrix,
    at: CscMatrix,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,

    basis: Vec<usize>,
    pos_of: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    lu: LuFactors,
    d: Vec<f64>,
    y: Vec<f64>,
    /// Cost vector currently priced (phase-1 or true costs).
    cur_cost: Vec<f64>,
    phase: u8,
    pub(crate) iterations: usize,
    since_refactor: usize,
    work: Vec<f64>,
    work2: Vec<f64>,
    /// Columns excluded from pricing until the next pivot.
    rejected: Vec<bool>,
    rejected_list: Vec<usize>,
    status: Status,
}

const NOT_BASIC: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;

impl Engine {
    pub(crate) fn new(lp: &StandardLp, opts: SimplexOptions) -> Result<Engine, SolveError> {
        let m = lp.num_rows();
        let n = lp.num_cols();
        if lp.v.nrows() != m || lp.v.ncols() != n || lp.lb.len() != n || lp.ub.len() != n {
            return Err(SolveError::Dimension(format!(
                "V is {}x{}, w has {}, c has {}, bounds have {}/{}",
                lp.v.nrows(),
                lp.v.ncols(),
                m,
                n,
                lp.lb.len(),
                lp.ub.len()
            )));
        }
        for j in 0..n {
            if lp.lb[j] > lp.ub[j] || lp.lb[j] == f64::INFINITY || lp.ub[j] == f64::NEG_INFINITY {
                return Err(SolveError::Dimension(format!("column {j} has empty bounds")));
            }
        }
        let (row_scale, col_scale) = if opts.scale {
            geometric_scaling(&lp.v)
        } else {
            (vec![1.0; m], vec![1.0; n])
        };
        // scaled structural matrix plus identity artificials
        let mut trip = Vec::with_capacity(lp.v.nnz() + m);
        for j in 0..n {
            let (rows, vals) = lp.v.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                trip.push((i, j, v * row_scale[i] * col_scale[j]));
            }
        }
        for i in 0..m {
            trip.push((i, n + i, 1.0));
        }
        let a = CscMatrix::from_triplets(m, n + m, &trip);
        let at = a.transpose();
        let mut cost = vec![0.0; n + m];
        let mut lb = vec![0.0; n + m];
        let mut ub = vec![0.0; n + m];
        for j in 0..n {
            cost[j] = lp.c[j] * col_scale[j];
            lb[j] = lp.lb[j] / col_scale[j];
            ub[j] = lp.ub[j] / col_scale[j];
        }
        let b = (0..m).map(|i| lp.w[i] * row_scale[i]).collect();
        Ok(Engine {
            opts,
            m,
            n,
            a,
            at,
            cost,
            lb,
            ub,
            b,
            row_scale,
            col_scale,
            basis: Vec::new(),
            pos_of: vec![NOT_BASIC; n + m],
            state: vec![VarState::Lower; n + m],
            x: vec![0.0; n + m],
            lu: LuFactors::default(),
            d: vec![0.0; n + m],
            y: vec![0.0; m],
            cur_cost: vec![0.0; n + m],
            phase: 1,
            iterations: 0,
            since_refactor: 0,
            work: Vec::new(),
            work2: Vec::new(),
            rejected: vec![false; n + m],
            rejected_list: Vec::new(),
            status: Status::LimitReached,
        })
    }

    pub(crate) fn max_iterations(&self) -> usize {
        self.opts.max_iterations
    }

    pub(crate) fn set_max_iterations(&mut self, n: usize) {
        self.opts.max_iterations = n;
    }

    pub(crate) fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.opts.deadline = deadline;
    }

    /// Sets bounds (unscaled) of structural column `j`.
    pub(crate) fn set_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        self.lb[j] = lb / self.col_scale[j];
        self.ub[j] = ub / self.col_scale[j];
    }

    pub(crate) fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot { basis: self.basis.iter().map(|&v| v as u32).collect(), state: self.state.clone() }
    }

    fn tol_for(&self, bound: f64) -> f64 {
        self.opts.feas_tol * (1.0 + bound.abs())
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lb[j],
            VarState::Upper => self.ub[j],
            VarState::Zero => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    fn rest_state(&self, j: usize) -> VarState {
        if self.lb[j].is_finite() {
            VarState::Lower
        } else if self.ub[j].is_finite() {
            VarState::Upper
        } else {
            VarState::Zero
        }
    }

    /// Cold start: slack/crash basis, then phase 1 and phase 2.
    pub(crate) fn solve_from_scratch(&mut self) -> Result<Status, SolveError> {
        self.crash_basis();
        self.refactor()?;
        self.primal()
    }

    /// Warm start from `snap` with the current bounds.
    pub(crate) fn solve_from(&mut self, snap: &BasisSnapshot) -> Result<Status, SolveError> {
        self.basis = snap.basis.iter().map(|&v| v as usize).collect();
        self.state = snap.state.clone();
        for p in self.pos_of.iter_mut() {
            *p = NOT_BASIC;
        }
        for (i, &v) in self.basis.iter().enumerate() {
            self.pos_of[v] = i;
        }
        // nonbasic states must match the (possibly changed) bounds
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            self.state[j] = match self.state[j] {
                VarState::Upper if self.ub[j].is_finite() => VarState::Upper,
                VarState::Lower if self.lb[j].is_finite() => VarState::Lower,
                _ => self.rest_state(j),
            };
        }
        self.refactor()?;
        self.dual()
    }

    fn crash_basis(&mut self) {
        let (m, n) = (self.m, self.n);
        self.basis = vec![NOT_BASIC; m];
        for j in 0..n + m {
            self.state[j] = self.rest_state(j);
            self.pos_of[j] = NOT_BASIC;
        }
        let mut row_taken = vec![false; m];
        // unit columns (slacks) claim their row
        for j in 0..n {
            let (rows, _) = self.a.col(j);
            if rows.len() == 1 && !row_taken[rows[0]] && self.ub[j] > self.lb[j] {
                let r = rows[0];
                row_taken[r] = true;
                self.basis[r] = j;
            }
        }
        // triangular crash for the remaining rows: a column may take row r if
        // it has no entry in a row already taken by a crash column
        let mut crash_row = vec![false; m];
        let mut used = vec![false; n];
        for &j in self.basis.iter().filter(|&&j| j != NOT_BASIC) {
            used[j] = true;
        }
        // prefer free, then one-sided, then boxed columns
        let rank = |lb: f64, ub: f64| -> u8 {
            match (lb.is_finite(), ub.is_finite()) {
                (false, false) => 0,
                (true, false) | (false, true) => 1,
                (true, true) => 2,
            }
        };
        let mut order: Vec<usize> = (0..n).filter(|&j| self.ub[j] > self.lb[j]).collect();
        order.sort_by_key(|&j| (rank(self.lb[j], self.ub[j]), self.a.col(j).0.len(), j));
        for j in order {
            if used[j] {
                continue;
            }
            let (rows, vals) = self.a.col(j);
            if rows.iter().any(|&r| crash_row[r]) {
                continue;
            }
            let colmax = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let mut pick = None;
            for (&r, &v) in rows.iter().zip(vals) {
                if !row_taken[r] && v.abs() >= 0.5 * colmax {
                    pick = Some(r);
                    break;
                }
            }
            if let Some(r) = pick {
                row_taken[r] = true;
                crash_row[r] = true;
                used[j] = true;
                self.basis[r] = j;
            }
        }
        for r in 0..m {
            if self.basis[r] == NOT_BASIC {
                self.basis[r] = n + r;
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            self.state[j] = VarState::Basic;
            self.pos_of[j] = i;
        }
    }

    fn basis_columns(&self) -> Vec<Vec<(usize, f64)>> {
        self.basis
            .iter()
            .map(|&j| {
                let (rows, vals) = self.a.col(j);
                rows.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect()
    }

    /// Refactorizes the basis and recomputes primal values. Singular bases are
    /// repaired by swapping in artificial columns.
    fn refactor(&mut self) -> Result<(), SolveError> {
        for attempt in 0..6 {
            match LuFactors::factorize(self.m, &self.basis_columns()) {
                Ok(lu) => {
                    self.clear_rejected();
                    self.lu = lu;
                    self.since_refactor = 0;
                    self.compute_primal();
                    return Ok(());
                }
                Err(sing) => {
                    log::debug!("singular basis ({} deficient), repairing (attempt {attempt})", sing.rows.len());
                    for (&r, &p) in sing.rows.iter().zip(&sing.positions) {
                        let old = self.basis[p];
                        self.pos_of[old] = NOT_BASIC;
                        self.state[old] = self.rest_state(old);
                        let art = self.n + r;
                        if self.pos_of[art] != NOT_BASIC {
                            // artificial already basic elsewhere; should not happen
                            return Err(SolveError::Numerical("basis repair conflict".into()));
                        }
                        self.basis[p] = art;
                        self.pos_of[art] = p;
                        self.state[art] = VarState::Basic;
                    }
                }
            }
        }
        Err(SolveError::Numerical("basis repair failed".into()))
    }

    fn compute_primal(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                let (rows, vals) = self.a.col(j);
                for (&i, &a) in rows.iter().zip(vals) {
                    rhs[i] -= a * v;
                }
            }
        }
        self.lu.ftran(&mut rhs, &mut self.work);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn phase1_cost(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lb[j] - self.tol_for(self.lb[j]) {
            -1.0
        } else if x > self.ub[j] + self.tol_for(self.ub[j]) {
            1.0
        } else {
            0.0
        }
    }

    fn set_costs(&mut self) {
        for j in 0..self.n + self.m {
            self.cur_cost[j] = if self.phase == 1 {
                if self.state[j] == VarState::Basic {
                    self.phase1_cost(j)
                } else {
                    0.0
                }
            } else {
                self.cost[j]
            };
        }
    }

    /// `y = B⁻ᵀ c_B`, `d = c − Aᵀy`.
    fn compute_duals(&mut self) {
        let mut cb: Vec<f64> = self.basis.iter().map(|&j| self.cur_cost[j]).collect();
        self.lu.btran(&mut cb, &mut self.work);
        self.y = cb;
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let (rows, vals) = self.a.col(j);
            let mut s = self.cur_cost[j];
            for (&i, &a) in rows.iter().zip(vals) {
                s -= a * self.y[i];
            }
            self.d[j] = s;
        }
    }

    fn infeasible_basics(&self) -> bool {
        self.basis.iter().any(|&j| self.phase1_cost(j) != 0.0)
    }

    fn check_deadline(&self) -> bool {
        self.opts.deadline.map_or(false, |d| Instant::now() >= d)
    }

    /// Primal simplex from the current (factorized) basis.
    fn primal(&mut self) -> Result<Status, SolveError> {
        self.phase = if self.infeasible_basics() { 1 } else { 2 };
        self.set_costs();
        self.compute_duals();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut last_obj = f64::INFINITY;
        loop {
            if self.iterations >= self.opts.max_iterations || (self.iterations % 64 == 0 && self.check_deadline()) {
                self.status = Status::LimitReached;
                return Ok(self.status);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                if self.phase == 1 && !self.infeasible_basics() {
                    self.phase = 2;
                }
                self.set_costs();
                self.compute_duals();
            }
            if self.iterations % 5000 == 0 {
                log::trace!(
                    "primal it {} phase {} obj {:.9e} bland {bland} degenerate {degenerate_run}",
                    self.iterations,
                    self.phase,
                    self.current_objective()
                );
            }
            let Some((q, dir)) = self.price(bland) else {
                if self.phase == 1 {
                    // verify with fresh factors before concluding
                    if self.since_refactor > 0 {
                        self.refactor()?;
                        self.set_costs();
                        self.compute_duals();
                        if !self.infeasible_basics() {
                            self.phase = 2;
                            self.set_costs();
                            self.compute_duals();
                        }
                        continue;
                    }
                    if self.infeasible_basics() {
                        self.status = Status::Infeasible;
                        return Ok(self.status);
                    }
                    self.phase = 2;
                    self.set_costs();
                    self.compute_duals();
                    continue;
                }
                if self.since_refactor > 0 {
                    self.refactor()?;
                    if self.infeasible_basics() {
                        self.phase = 1;
                    }
                    self.set_costs();
                    self.compute_duals();
                    if self.price(false).is_some() || self.phase == 1 {
                        continue;
                    }
                }
                self.status = Status::Optimal;
                return Ok(self.status);
            };
            // entering column image
            let mut alpha = vec![0.0; self.m];
            {
                let (rows, vals) = self.a.col(q);
                for (&i, &v) in rows.iter().zip(vals) {
                    alpha[i] = v;
                }
            }
            self.lu.ftran(&mut alpha, &mut self.work);
            // the updated reduced cost can drift; recompute it from alpha
            let mut dq = self.cur_cost[q];
            for (p, &j) in self.basis.iter().enumerate() {
                if alpha[p] != 0.0 {
                    dq -= self.cur_cost[j] * alpha[p];
                }
            }
            if dq * dir >= -self.opts.opt_tol {
                self.d[q] = dq;
                self.reject(q);
                continue;
            }
            self.d[q] = dq;
            let step = self.ratio_test(q, dir, &alpha, bland);
            let Some((theta, leave)) = step else {
                if self.phase == 2 {
                    self.status = Status::Unbounded;
                    return Ok(self.status);
                }
                // phase 1 cannot be unbounded: only negligible pivots remain
                self.reject(q);
                continue;
            };
            self.clear_rejected();
            self.iterations += 1;
            // primal update
            let delta = dir * theta;
            if delta != 0.0 {
                self.x[q] += delta;
                for (p, &j) in self.basis.iter().enumerate() {
                    if alpha[p] != 0.0 {
                        self.x[j] -= delta * alpha[p];
                    }
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.x[q] = self.nonbasic_value(q);
                }
                Some((r, to_upper)) => {
                    self.pivot(q, r, to_upper, &alpha)?;
                }
            }
            if self.phase == 1 {
                self.refresh_phase1_costs()?;
                if !self.infeasible_basics() {
                    self.phase = 2;
                    self.set_costs();
                    self.compute_duals();
                }
            }
            let obj = self.current_objective();
            if theta.abs() <= 1e-12 || obj >= last_obj - 1e-12 * (1.0 + obj.abs()) {
                degenerate_run += 1;
                if degenerate_run > self.opts.stall_threshold {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            last_obj = obj;
        }
    }

    fn reject(&mut self, j: usize) {
        if !self.rejected[j] {
            self.rejected[j] = true;
            self.rejected_list.push(j);
        }
    }

    fn clear_rejected(&mut self) {
        for j in self.rejected_list.drain(..) {
            self.rejected[j] = false;
        }
    }

    fn current_objective(&self) -> f64 {
        if self.phase == 1 {
            self.basis
                .iter()
                .map(|&j| {
                    let x = self.x[j];
                    (self.lb[j] - x).max(0.0) + (x - self.ub[j]).max(0.0)
                })
                .sum()
        } else {
            (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
        }
    }

    /// Chooses an entering column and its direction (+1 increase, −1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n {
            if self.rejected[j] {
                continue;
            }
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.ub[j] == self.lb[j] => continue,
                VarState::Lower => {
                    if self.d[j] < -tol {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarState::Upper => {
                    if self.d[j] > tol {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VarState::Zero => {
                    if self.d[j] < -tol {
                        1.0
                    } else if self.d[j] > tol {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if best.map_or(true, |b| score > b.2) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Harris ratio test. Returns the step length and the leaving position
    /// with the bound it is set to (`None` for a bound flip of the entering
    /// variable).
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Option<(usize, bool)>)> {
        // breakpoints: (position, rate, target bound, to_upper)
        let mut theta_max = f64::INFINITY;
        let phase1 = self.phase == 1;
        // x moves at `rate` per unit step; `rl`/`ru` classify x against its
        // bounds, `slack` widens the approached bound for the Harris first pass
        let limit = |x: f64, rate: f64, lb: f64, ub: f64, rl: f64, ru: f64, slack: f64| -> Option<(f64, bool)> {
            if rate < 0.0 {
                if x > ub + ru && phase1 {
                    Some(((x - ub) / -rate, true))
                } else if x >= lb - rl {
                    if lb.is_finite() {
                        Some((((x - lb) + slack) / -rate, false))
                    } else {
                        None
                    }
                } else {
                    None
                }
            } else if x < lb - rl && phase1 {
                Some(((lb - x) / rate, false))
            } else if x <= ub + ru {
                if ub.is_finite() {
                    Some((((ub - x) + slack) / rate, true))
                } else {
                    None
                }
            } else {
                None
            }
        };
        // pass 1: relaxed bounds
        for (p, &j) in self.basis.iter().enumerate() {
            let a = alpha[p];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let (rl, ru) = (self.tol_for(self.lb[j]), self.tol_for(self.ub[j]));
            let slack = if rate < 0.0 { rl } else { ru };
            if let Some((t, _)) = limit(self.x[j], rate, self.lb[j], self.ub[j], rl, ru, slack) {
                theta_max = theta_max.min(t.max(0.0));
            }
        }
        let flip = self.ub[q] - self.lb[q];
        if theta_max == f64::INFINITY && !flip.is_finite() {
            return None;
        }
        // pass 2: among exact breakpoints within theta_max take the largest pivot
        let mut best: Option<(usize, f64, bool, f64)> = None; // pos, theta, to_upper, |alpha|
        for (p, &j) in self.basis.iter().enumerate() {
            let a = alpha[p];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let (rl, ru) = (self.tol_for(self.lb[j]), self.tol_for(self.ub[j]));
            if let Some((t, to_upper)) = limit(self.x[j], rate, self.lb[j], self.ub[j], rl, ru, 0.0) {
                let t = t.max(0.0);
                if t <= theta_max {
                    let better = match best {
                        None => true,
                        Some((bp, _, _, ba)) => {
                            if bland {
                                j < self.basis[bp]
                            } else {
                                a.abs() > ba
                            }
                        }
                    };
                    if better {
                        best = Some((p, t, to_upper, a.abs()));
                    }
                }
            }
        }
        if flip.is_finite() && flip <= best.map_or(f64::INFINITY, |b| b.1) {
            return Some((flip, None));
        }
        let (p, t, to_upper, _) = best?;
        Some((t, Some((p, to_upper))))
    }

    /// Replaces the basic variable at position `r` with `q`.
    fn pivot(&mut self, q: usize, r: usize, to_upper: bool, alpha: &[f64]) -> Result<(), SolveError> {
        let leaving = self.basis[r];
        let arq = alpha[r];
        // pivot row of B⁻¹A for the reduced-cost update
        let mut rho = vec![0.0; self.m];
        rho[r] = 1.0;
        self.lu.btran(&mut rho, &mut self.work);
        let theta_d = self.d[q] / arq;
        if theta_d != 0.0 {
            self.update_duals_along(&rho, theta_d);
        }
        self.d[q] = 0.0;
        // leaving variable: its cost in the priced objective becomes the
        // nonbasic cost (zero in phase 1)
        let old_cost = self.cur_cost[leaving];
        let new_cost = if self.phase == 1 { 0.0 } else { self.cost[leaving] };
        self.cur_cost[leaving] = new_cost;
        self.d[leaving] = -theta_d + (new_cost - old_cost);

        self.basis[r] = q;
        self.pos_of[q] = r;
        self.pos_of[leaving] = NOT_BASIC;
        self.state[q] = VarState::Basic;
        self.state[leaving] = if to_upper { VarState::Upper } else { VarState::Lower };
        if (!self.lb[leaving].is_finite() && !to_upper) || (!self.ub[leaving].is_finite() && to_upper) {
            self.state[leaving] = self.rest_state(leaving);
        }
        self.x[leaving] = self.nonbasic_value(leaving);
        self.lu.update(r, alpha);
        self.since_refactor += 1;
        Ok(())
    }

    /// `y += θ·ρ`, `d_j −= θ·(ρᵀa_j)` for nonbasic `j`, computed row-wise.
    fn update_duals_along(&mut self, rho: &[f64], theta: f64) {
        let mut row_alpha = std::mem::take(&mut self.work2);
        row_alpha.clear();
        row_alpha.resize(self.n + self.m, 0.0);
        for (i, &ri) in rho.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            self.y[i] += theta * ri;
            let (cols, vals) = self.at.col(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row_alpha[j] += ri * v;
            }
        }
        for j in 0..self.n + self.m {
            if row_alpha[j] != 0.0 && self.state[j] != VarState::Basic {
                self.d[j] -= theta * row_alpha[j];
            }
        }
        self.work2 = row_alpha;
    }

    /// Re-derives phase-1 costs of basic variables and propagates changes
    /// into `y` and `d`.
    fn refresh_phase1_costs(&mut self) -> Result<(), SolveError> {
        let mut delta = vec![0.0; self.m];
        let mut any = false;
        for (p, &j) in self.basis.iter().enumerate() {
            let c = self.phase1_cost(j);
            if c != self.cur_cost[j] {
                delta[p] = c - self.cur_cost[j];
                self.cur_cost[j] = c;
                any = true;
            }
        }
        if any {
            self.lu.btran(&mut delta, &mut self.work);
            // d = c − Aᵀy: y grows by Δy, so d shrinks by AᵀΔy
            self.update_duals_along(&delta, 1.0);
        }
        Ok(())
    }

    /// Dual simplex from a factorized basis. Falls back to primal simplex
    /// when the basis is not dual feasible.
    fn dual(&mut self) -> Result<Status, SolveError> {
        self.phase = 2;
        self.set_costs();
        self.compute_duals();
        let tol = self.opts.opt_tol.max(1e-7);
        let dual_feasible = (0..self.n + self.m).all(|j| match self.state[j] {
            VarState::Basic => true,
            _ if self.ub[j] == self.lb[j] => true,
            VarState::Lower => self.d[j] >= -tol,
            VarState::Upper => self.d[j] <= tol,
            VarState::Zero => self.d[j].abs() <= tol,
        });
        if !dual_feasible {
            return self.primal();
        }
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.opts.max_iterations || (self.iterations % 64 == 0 && self.check_deadline()) {
                self.status = Status::LimitReached;
                return Ok(self.status);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                self.compute_duals();
            }
            // leaving row: largest bound violation
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.basis.iter().enumerate() {
                let x = self.x[j];
                let viol = if x < self.lb[j] - self.tol_for(self.lb[j]) {
                    self.lb[j] - x
                } else if x > self.ub[j] + self.tol_for(self.ub[j]) {
                    x - self.ub[j]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lp, lv)) => {
                        if bland {
                            j < self.basis[lp]
                        } else {
                            viol > lv
                        }
                    }
                };
                if better {
                    leave = Some((p, viol));
                }
            }
            if self.iterations % 5000 == 0 {
                log::trace!("dual it {} max violation {:?}", self.iterations, leave.map(|l| l.1));
            }
            let Some((r, viol)) = leave else {
                // primal feasible: confirm optimality with the primal method
                return self.primal();
            };
            let jl = self.basis[r];
            let below = self.x[jl] < self.lb[jl];
            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            self.lu.btran(&mut rho, &mut self.work);
            // pivot row
            let mut row_alpha = std::mem::take(&mut self.work2);
            row_alpha.clear();
            row_alpha.resize(self.n + self.m, 0.0);
            for (i, &ri) in rho.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                let (cols, vals) = self.at.col(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    row_alpha[j] += ri * v;
                }
            }
            // ratio test (Harris): entering j must move x_jl toward its bound
            let mut theta_max = f64::INFINITY;
            let eligible = |a: f64, st: VarState| -> bool {
                if a.abs() < PIVOT_TOL {
                    return false;
                }
                // x_jl changes by −a per unit increase of x_j
                match st {
                    VarState::Lower => (a < 0.0) == below,
                    VarState::Upper => (a > 0.0) == below,
                    VarState::Zero => true,
                    VarState::Basic => false,
                }
            };
            for j in 0..self.n {
                let st = self.state[j];
                if st == VarState::Basic || self.ub[j] == self.lb[j] {
                    continue;
                }
                let a = row_alpha[j];
                if !eligible(a, st) {
                    continue;
                }
                let ratio = (self.d[j].abs() + tol) / a.abs();
                theta_max = theta_max.min(ratio);
            }
            if theta_max == f64::INFINITY {
                self.work2 = row_alpha;
                self.status = Status::Infeasible;
                return Ok(self.status);
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let st = self.state[j];
                if st == VarState::Basic || self.ub[j] == self.lb[j] {
                    continue;
                }
                let a = row_alpha[j];
                if !eligible(a, st) {
                    continue;
                }
                if bland {
                    let ratio = self.d[j].abs() / a.abs();
                    if enter.map_or(true, |e| ratio < e.1 - 1e-12 * (1.0 + e.1)) {
                        enter = Some((j, ratio));
                    }
                } else if self.d[j].abs() / a.abs() <= theta_max && enter.map_or(true, |e| a.abs() > e.1) {
                    enter = Some((j, a.abs()));
                }
            }
            let (q, _) = enter.expect("nonempty candidate set");
            self.work2 = row_alpha;
            let mut alpha = vec![0.0; self.m];
            {
                let (rows, vals) = self.a.col(q);
                for (&i, &v) in rows.iter().zip(vals) {
                    alpha[i] = v;
                }
            }
            self.lu.ftran(&mut alpha, &mut self.work);
            let arq = alpha[r];
            if arq.abs() < PIVOT_TOL {
                // inconsistent pivot; refresh and retry
                self.refactor()?;
                self.compute_duals();
                continue;
            }
            let target = if below { self.lb[jl] } else { self.ub[jl] };
            // x_jl + (−arq)·Δ = target
            let delta_q = (self.x[jl] - target) / arq;
            self.iterations += 1;
            self.x[q] += delta_q;
            for (p, &j) in self.basis.iter().enumerate() {
                if alpha[p] != 0.0 {
                    self.x[j] -= delta_q * alpha[p];
                }
            }
            self.x[jl] = target;
            // a slightly wrong-signed d_q (within the Harris tolerance) would
            // step the duals backwards; shift its cost so d_q = 0 instead
            let wrong_sign = match self.state[q] {
                VarState::Lower => self.d[q] < 0.0,
                VarState::Upper => self.d[q] > 0.0,
                _ => false,
            };
            if wrong_sign {
                self.cur_cost[q] -= self.d[q];
                self.d[q] = 0.0;
            }
            // reduced costs
            let theta_d = self.d[q] / arq;
            if theta_d.abs() * viol <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.stall_threshold {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            if theta_d != 0.0 {
                self.update_duals_along(&rho, theta_d);
            }
            self.d[q] = 0.0;
            self.d[jl] = -theta_d;
            self.basis[r] = q;
            self.pos_of[q] = r;
            self.pos_of[jl] = NOT_BASIC;
            self.state[q] = VarState::Basic;
            self.state[jl] = if below { VarState::Lower } else { VarState::Upper };
            self.lu.update(r, &alpha);
            self.since_refactor += 1;
        }
    }

    /// Unscaled primal values of the structural columns.
    pub(crate) fn primal_values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x[j] * self.col_scale[j]).collect()
    }

    pub(crate) fn objective(&self, lp: &StandardLp) -> f64 {
        lp.objective_value(&self.primal_values())
    }

    pub(crate) fn result(&mut self, lp: &StandardLp) -> SimplexResult {
        let primal = self.primal_values();
        if self.status == Status::Optimal {
            // true-cost duals for reporting
            self.phase = 2;
            self.set_costs();
            self.compute_duals();
        }
        let dual: Vec<f64> = (0..self.m).map(|i| self.y[i] * self.row_scale[i]).collect();
        let reduced_costs: Vec<f64> = (0..self.n).map(|j| self.d[j] / self.col_scale[j]).collect();
        let objective = match self.status {
            Status::Infeasible => f64::INFINITY,
            Status::Unbounded => f64::NEG_INFINITY,
            _ => lp.objective_value(&primal),
        };
        SimplexResult { status: self.status, primal, dual, reduced_costs, objective, iterations: self.iterations }
    }
}

/// Geometric-mean row/column equilibration (a few sweeps), rounded to powers
/// of two so scaling introduces no rounding error.
fn geometric_scaling(a: &CscMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut r = vec![1.0f64; m];
    let mut s = vec![1.0f64; n];
    let at = a.transpose();
    for _ in 0..4 {
        for i in 0..m {
            let (cols, vals) = at.col(i);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (&j, &v) in cols.iter().zip(vals) {
                let x = (v * s[j]).abs();
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if hi > 0.0 {
                r[i] = 1.0 / (lo * hi).sqrt();
            }
        }
        for j in 0..n {
            let (rows, vals) = a.col(j);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (&i, &v) in rows.iter().zip(vals) {
                let x = (v * r[i]).abs();
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if hi > 0.0 {
                s[j] = 1.0 / (lo * hi).sqrt();
            }
        }
    }
    let pow2 = |x: f64| 2f64.powi(x.log2().round() as i32);
    (r.into_iter().map(pow2).collect(), s.into_iter().map(pow2).collect())
}
