//! Single-level models for the three planning scenarios and their solution.
//!
//! * baseline: no storage, no price signal, every overloaded component
//!   upgraded;
//! * bess-only: storage and upgrades free, no price signal;
//! * bess-der: storage, upgrades and the price signal free.
//!
//! The investor is present in every scenario. With the signal fixed at zero
//! the investor's problem no longer depends on the planner, so its
//! optimality is imposed through its optimal value: `cᵀy ≤ V(0)`. With a
//! free signal the KKT reformulation is used.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nwa_lp::{
    solve_external, solve_lp_with, solve_milp_with_heuristic, BnbOptions, BnbStats, ConId, LinExpr, Model,
    ModelError, Sense, SimplexOptions, Solution, SolveError, Status, VarId,
};
use thiserror::Error;

use crate::bilevel::{
    binding_big_m, duals_for_response, embed_primal, extract_duals, kkt_reformulate, linearized_payment, BigM, BilevelError, DualVars,
    KktHandles, LowerLevelVars,
};
use crate::investor::{build_investor_lp, InvestorError, LowerLevelForm, LowerLevelSolution};
use crate::network::{overloaded_upgrades, Case};
use crate::planner::{
    assemble_planner_objective, build_bess, build_head_costs, build_upgrades, pwf_planner, BessHandles, HeadHandles,
    ObjectiveParts, UpgradeHandles,
};
use crate::powerflow::{build_lindistflow, FlowHandles, Injections, PowerFlowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Baseline,
    BessOnly,
    BessDer,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Baseline, ScenarioKind::BessOnly, ScenarioKind::BessDer];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Baseline => "baseline",
            ScenarioKind::BessOnly => "bess",
            ScenarioKind::BessDer => "bess-der",
        }
    }

    pub fn parse(s: &str) -> Option<ScenarioKind> {
        match s {
            "baseline" => Some(ScenarioKind::Baseline),
            "bess" | "bess-only" => Some(ScenarioKind::BessOnly),
            "bess-der" => Some(ScenarioKind::BessDer),
            _ => None,
        }
    }

    pub fn has_signal(self) -> bool {
        self == ScenarioKind::BessDer
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Investor(#[from] InvestorError),
    #[error(transparent)]
    Bilevel(#[from] BilevelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("overloaded component `{0}` has no upgrade option")]
    MissingUpgrade(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Internal,
    /// Command run as `command model.lp solution.txt` inside `workdir`.
    External { command: String, workdir: PathBuf },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub backend: Backend,
    /// Rounds of ×10 big-M escalation when a dual sits at its cap.
    pub max_escalations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { gap: 0.02, time_limit: None, node_limit: 1_000_000, backend: Backend::Internal, max_escalations: 3 }
    }
}

/// Planner decisions carried from one scenario into another as a starting
/// incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    /// Transformer upgrade values, then line-group values.
    pub upgrades: Vec<f64>,
    /// Investor columns.
    pub y: Vec<f64>,
}

/// The single-level model of one scenario with handles to every part.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub kind: ScenarioKind,
    pub model: Model,
    pub inj: Injections,
    pub flows: FlowHandles,
    pub bess: BessHandles,
    pub upgrades: UpgradeHandles,
    pub head: HeadHandles,
    pub llf: LowerLevelForm,
    pub ll: LowerLevelVars,
    pub kkt: Option<KktHandles>,
    /// Price variables (bess-der only).
    pub prices: Vec<VarId>,
    pub parts: ObjectiveParts,
    /// Linearized `Σλ·y^EXP` (bess-der only).
    pub payment: Option<LinExpr>,
    /// Investor value-function row and the zero-signal optimum.
    pub value_cut: Option<(ConId, f64)>,
    /// Standalone zero-signal investor solution.
    pub no_signal: LowerLevelSolution,
    pub pwf_ul: f64,
}

impl ScenarioModel {
    pub fn upgrade_vars(&self) -> Vec<VarId> {
        self.upgrades.transformer.iter().chain(&self.upgrades.line_group).map(|&(_, z)| z).collect()
    }
}

/// Builds the single-level model of `kind`.
pub fn build_scenario(case: &Case, kind: ScenarioKind, big_m: Option<&BigM>) -> Result<ScenarioModel, ScenarioError> {
    build(case, kind, big_m, None)
}

/// Storage and upgrades free, the price signal fixed at `x`. The investor
/// is held to its optimal face at `x` and the planner pays for its exports.
pub fn build_fixed_signal(case: &Case, x: &[f64]) -> Result<ScenarioModel, ScenarioError> {
    build(case, ScenarioKind::BessOnly, None, Some(x))
}

fn build(
    case: &Case,
    kind: ScenarioKind,
    big_m: Option<&BigM>,
    fixed_x: Option<&[f64]>,
) -> Result<ScenarioModel, ScenarioError> {
    let mut model = Model::new();
    let f = &case.feeder;
    let steps = case.series.steps;
    let h = case.series.step_weight();
    let mut inj = Injections::from_loads(case);

    let bess = build_bess(&mut model, case)?;
    if kind == ScenarioKind::Baseline {
        for u in &bess.units {
            model.fix(u.kw, 0.0)?;
            model.fix(u.kwh, 0.0)?;
        }
    }
    bess.add_injections(&mut inj);

    let llf = build_investor_lp(case)?;
    let ll = embed_primal(&mut model, &llf)?;
    for (b, &j) in llf.buses.iter().enumerate() {
        let phases = f.buses[j].phase_list();
        for t in 0..steps {
            let total: f64 = phases.iter().map(|&p| case.series.load_p[j][p][t]).sum();
            for &p in &phases {
                // the investor's balance replaces the bus load, split by phase load share
                let share = if total > 0.0 {
                    case.series.load_p[j][p][t] / (total * h)
                } else {
                    1.0 / (h * phases.len() as f64)
                };
                let e = &mut inj.p[j][p][t];
                let c = e.constant_term();
                e.add_constant(-c);
                e.add_term(ll.y[llf.exp_col[b][t]], share);
                e.add_term(ll.y[llf.imp_col[b][t]], -share);
            }
        }
    }

    let flows = build_lindistflow(&mut model, case, &inj)?;
    let upgrades = build_upgrades(&mut model, case, &flows, &inj)?;
    let head = build_head_costs(&mut model, case, &flows)?;
    if kind == ScenarioKind::Baseline {
        let (trf, groups) = overloaded_upgrades(case);
        for j in trf {
            let &(_, z) = upgrades.transformer.iter().find(|(b, _)| *b == j).unwrap();
            model.fix(z, 1.0)?;
        }
        for g in groups {
            let &(_, z) = upgrades.line_group.iter().find(|(x, _)| *x == g).unwrap();
            model.fix(z, 1.0)?;
        }
        for e in crate::network::overload_report(case).iter().filter(|e| e.overloaded) {
            let missing = match e.component {
                crate::network::Component::Line(k) => f.lines[k].upgrade.is_none(),
                crate::network::Component::Transformer(_) => false,
            };
            if missing {
                return Err(ScenarioError::MissingUpgrade(e.name.clone()));
            }
        }
    }

    let no_signal = llf.solve_at(&vec![0.0; llf.num_prices()])?;
    let pwf_ul = pwf_planner(case);
    let mut parts = ObjectiveParts {
        bess_capex: bess.capex(case),
        transformer_capex: upgrades.transformer_capex(case),
        line_capex: upgrades.line_capex(case),
        energy: head.energy.clone(),
        demand: head.demand.clone(),
        der_payment: LinExpr::new(),
    };

    let mut prices = Vec::new();
    let mut kkt = None;
    let mut payment = None;
    let mut value_cut = None;
    if kind.has_signal() {
        for &(j, t) in &llf.prices {
            prices.push(model.continuous(format!("xlam_{}_{t}", f.buses[j].id), 0.0, llf.price_cap)?);
        }
        let m = big_m.cloned().unwrap_or_else(|| BigM::default_for(&llf));
        let handles = kkt_reformulate(&mut model, &llf, &ll, &prices, &m)?;
        let lin = linearized_payment(&llf, &ll, &handles)?;
        parts.der_payment.add_scaled(&lin, pwf_ul / llf.pwf);
        payment = Some(lin);
        kkt = Some(handles);
    } else {
        let (g, v0) = match fixed_x {
            Some(x) => {
                let at = llf.solve_at(x)?;
                for (b, cols) in llf.exp_col.iter().enumerate() {
                    for (t, &k) in cols.iter().enumerate() {
                        parts.der_payment.add_term(ll.y[k], pwf_ul * x[llf.price_of[b][t]]);
                    }
                }
                (llf.gradient(x), at.objective)
            }
            None => (llf.c.clone(), no_signal.objective),
        };
        let e = LinExpr::from_terms(ll.y.iter().zip(&g).map(|(&y, &c)| (y, c)));
        let slack = 1e-12 * v0.abs().max(1.0);
        let id = model.add_constraint(e, Sense::Le, v0 + slack, "investor_value")?;
        value_cut = Some((id, v0));
    }
    assemble_planner_objective(&mut model, &parts)?;

    Ok(ScenarioModel {
        kind,
        model,
        inj,
        flows,
        bess,
        upgrades,
        head,
        llf,
        ll,
        kkt,
        prices,
        parts,
        payment,
        value_cut,
        no_signal,
        pwf_ul,
    })
}

/// Solved scenario: the model, its solution and the lower-level duals.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub sm: ScenarioModel,
    pub solution: Solution,
    pub stats: BnbStats,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub duals: DualVars,
    pub escalations: usize,
    pub elapsed: Duration,
}

impl ScenarioOutcome {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            upgrades: self.sm.upgrade_vars().iter().map(|z| self.solution.primal[z.0]).collect(),
            y: self.y.clone(),
        }
    }
}

/// Builds and solves one scenario, escalating big-M when a multiplier sits
/// at its cap.
pub fn solve_scenario(
    case: &Case,
    kind: ScenarioKind,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<ScenarioOutcome, ScenarioError> {
    let start = Instant::now();
    let llf = build_investor_lp(case)?;
    let mut big_m = BigM::default_for(&llf);
    let mut escalations = 0;
    loop {
        let sm = build_scenario(case, kind, Some(&big_m))?;
        let (solution, stats) = solve_model(&sm, cfg, warm, start)?;
        if !solution.has_point() {
            return Ok(finish(sm, solution, stats, escalations, start));
        }
        let binding = sm.kkt.as_ref().map_or(0, |k| binding_big_m(k, &solution.primal));
        if binding > 0 && escalations < cfg.max_escalations {
            log::info!("{binding} multiplier(s) at big-M; escalating");
            big_m = big_m.escalate(10.0);
            escalations += 1;
            continue;
        }
        return Ok(finish(sm, solution, stats, escalations, start));
    }
}

fn finish(sm: ScenarioModel, solution: Solution, stats: BnbStats, escalations: usize, start: Instant) -> ScenarioOutcome {
    let (y, x, duals) = if solution.has_point() {
        let p = &solution.primal;
        let y: Vec<f64> = sm.ll.y.iter().map(|v| p[v.0]).collect();
        let x: Vec<f64> = if sm.prices.is_empty() {
            vec![0.0; sm.llf.num_prices()]
        } else {
            sm.prices.iter().map(|v| p[v.0]).collect()
        };
        let duals = match &sm.kkt {
            Some(k) => extract_duals(&sm.llf, k, p, &x),
            None => duals_for_response(&sm.llf, &y, &x).unwrap_or_else(|e| {
                log::warn!("falling back to standalone lower-level duals: {e}");
                DualVars {
                    lambda: sm.no_signal.lambda.clone(),
                    mu_up: sm.no_signal.mu_up.clone(),
                    mu_lo: sm.no_signal.mu_lo.clone(),
                }
            }),
        };
        (y, x, duals)
    } else {
        (Vec::new(), Vec::new(), DualVars { lambda: Vec::new(), mu_up: Vec::new(), mu_lo: Vec::new() })
    };
    ScenarioOutcome { sm, solution, stats, y, x, duals, escalations, elapsed: start.elapsed() }
}

fn solve_model(
    sm: &ScenarioModel,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
    start: Instant,
) -> Result<(Solution, BnbStats), ScenarioError> {
    let model = &sm.model;
    match &cfg.backend {
        Backend::External { command, workdir } => {
            let sol = solve_external(model, command, workdir)?;
            Ok((sol, BnbStats { elapsed: start.elapsed(), ..Default::default() }))
        }
        Backend::Internal if model.num_binaries() == 0 => {
            let sol = solve_lp_with(model, &SimplexOptions::default())?;
            Ok((sol, BnbStats { nodes: 1, elapsed: start.elapsed(), ..Default::default() }))
        }
        Backend::Internal => {
            let mut priority = vec![0; model.num_vars()];
            for z in sm.upgrade_vars() {
                priority[z.0] = 1;
            }
            let opts = BnbOptions {
                priority,
                rel_gap: cfg.gap,
                node_limit: cfg.node_limit,
                time_limit: cfg.time_limit.map(|t| t.saturating_sub(start.elapsed())),
                ..Default::default()
            };
            let mut first = true;
            let mut heuristic = |m: &Model, relax: &[f64]| -> Vec<Vec<f64>> {
                let mut out = Vec::new();
                if first {
                    first = false;
                    if let Some(w) = warm {
                        out.push(pattern_point(sm, m, &w.y, &w.upgrades));
                    }
                }
                out.extend(relaxation_candidates(sm, m, relax));
                out
            };
            let (sol, stats) = solve_milp_with_heuristic(model, &opts, Some(&mut heuristic))?;
            Ok((sol, stats))
        }
    }
}

/// Model point whose binaries encode the complementarity pattern of an
/// investor response `y` and the given upgrade decisions.
pub fn pattern_point(sm: &ScenarioModel, m: &Model, y: &[f64], upgrades: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; m.num_vars()];
    for (z, &v) in sm.upgrade_vars().iter().zip(upgrades) {
        p[z.0] = if v > 1e-6 { 1.0 } else { 0.0 };
    }
    let llf = &sm.llf;
    if let Some(k) = &sm.kkt {
        for c in 0..llf.num_cols() {
            let band = 1e-7 * (1.0 + (llf.ub[c] - llf.lb[c]).abs());
            if let Some(u) = k.u_lo[c] {
                p[u.0] = if y[c] <= llf.lb[c] + band { 1.0 } else { 0.0 };
            }
            if let Some(u) = k.u_up[c] {
                let at_ub = y[c] >= llf.ub[c] - band;
                let at_lb = y[c] <= llf.lb[c] + band;
                p[u.0] = if at_ub && !at_lb { 1.0 } else { 0.0 };
            }
        }
        for (b, row) in k.exclusive.iter().enumerate() {
            for (t, e) in row.iter().enumerate() {
                if let Some(e) = e {
                    let imp = y[llf.imp_col[b][t]];
                    let exp = y[llf.exp_col[b][t]];
                    p[e.0] = if imp >= exp { 1.0 } else { 0.0 };
                }
            }
        }
    }
    p
}

fn relaxation_candidates(sm: &ScenarioModel, m: &Model, relax: &[f64]) -> Vec<Vec<f64>> {
    let Some(_) = &sm.kkt else { return Vec::new() };
    let ups: Vec<f64> = sm.upgrade_vars().iter().map(|z| relax[z.0]).collect();
    let all_up = vec![1.0; ups.len()];
    let mut out = Vec::new();
    let x: Vec<f64> = sm.prices.iter().map(|v| relax[v.0]).collect();
    if let Ok(sol) = sm.llf.solve_at(&x) {
        out.push(pattern_point(sm, m, &sol.y, &ups));
    }
    let y: Vec<f64> = sm.ll.y.iter().map(|v| relax[v.0]).collect();
    out.push(pattern_point(sm, m, &y, &ups));
    out.push(pattern_point(sm, m, &y, &all_up));
    out
}

pub fn is_optimal(o: &ScenarioOutcome) -> bool {
    o.solution.status == Status::Optimal
}
