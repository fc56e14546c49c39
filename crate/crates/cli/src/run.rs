//! Solving a scenario and assembling its report.

use std::path::{Path, PathBuf};

use nwa_core::network::Case;
use nwa_core::planner::pwf_planner;
use nwa_core::scenario::{ScenarioError, WarmStart};
use nwa_core::{load_case, solve_scenario, Backend, CaseError, ScenarioKind, ScenarioOutcome, SolverConfig};
use nwa_lp::Status;
use thiserror::Error;

use crate::cashflow::CashflowSeries;
use crate::report::{
    BessSize, Breakdown, CaseInfo, DerCapacity, InvestorSummary, InvestorTable, PricePoint, ScenarioReport,
    SolveSummary, Upgrade, Upgrades,
};
use crate::verify::{verify_outcome, VerifyError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_LIMIT: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario {0} is infeasible")]
    Infeasible(&'static str),
    #[error("scenario {0} is unbounded")]
    Unbounded(&'static str),
    #[error("scenario {0} stopped at a limit without a feasible plan")]
    NoIncumbent(&'static str),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("report was made from case {expected}, {path} now hashes to {found}")]
    CaseChanged { path: String, expected: String, found: String },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Infeasible(_) | RunError::Unbounded(_) => EXIT_INFEASIBLE,
            RunError::Scenario(ScenarioError::MissingUpgrade(_)) => EXIT_INFEASIBLE,
            RunError::NoIncumbent(_) => EXIT_LIMIT,
            _ => 1,
        }
    }
}

/// Loads a case and optionally shortens its horizon.
pub fn load_with_horizon(path: &Path, horizon: Option<usize>) -> Result<Case, CaseError> {
    let case = load_case(path)?;
    match horizon {
        Some(h) => case.with_horizon(h),
        None => Ok(case),
    }
}

/// Reloads the case a report was made from, refusing a changed file.
pub fn load_report_case(report: &ScenarioReport) -> Result<Case, RunError> {
    let path = PathBuf::from(&report.case.path);
    let case = load_case(&path)?;
    if case.hash != report.case.hash {
        return Err(RunError::CaseChanged {
            path: report.case.path.clone(),
            expected: report.case.hash.clone(),
            found: case.hash,
        });
    }
    Ok(case.with_horizon(report.case.horizon)?)
}

/// Solves one scenario and builds its report.
pub fn run_scenario(
    case: &Case,
    case_path: &Path,
    kind: ScenarioKind,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<(ScenarioReport, ScenarioOutcome), RunError> {
    let out = solve_scenario(case, kind, cfg, warm)?;
    match out.solution.status {
        Status::Infeasible => return Err(RunError::Infeasible(kind.name())),
        Status::Unbounded => return Err(RunError::Unbounded(kind.name())),
        _ if !out.solution.has_point() => return Err(RunError::NoIncumbent(kind.name())),
        _ => {}
    }
    let report = build_report(case, case_path, cfg, &out)?;
    Ok((report, out))
}

fn backend_name(b: &Backend) -> String {
    match b {
        Backend::Internal => "internal".into(),
        Backend::External { command, .. } => format!("external:{command}"),
    }
}

fn investor_summary(r: nwa_core::investor::InvestorResult) -> InvestorSummary {
    InvestorSummary {
        net_present_cost: r.net_present_cost,
        capex: r.capex,
        om: r.om,
        energy_cost: r.energy_cost,
        income: r.income,
        savings: r.savings,
        exported_kwh: r.exported_kwh,
        capacity: r.capacity_kw.into_iter().map(|(bus, kw)| DerCapacity { bus, kw }).collect(),
    }
}

pub fn build_report(
    case: &Case,
    case_path: &Path,
    cfg: &SolverConfig,
    o: &ScenarioOutcome,
) -> Result<ScenarioReport, RunError> {
    let f = &case.feeder;
    let sm = &o.sm;
    let p = &o.solution.primal;
    let parts = &sm.parts;
    let breakdown = Breakdown {
        transformer_upgrades: parts.transformer_capex.evaluate(p),
        line_upgrades: parts.line_capex.evaluate(p),
        bulk_energy: parts.energy.evaluate(p),
        demand_charges: parts.demand.evaluate(p),
        bess_capex: parts.bess_capex.evaluate(p),
        der_payments: parts.der_payment.evaluate(p),
    };
    let upgrades = Upgrades {
        transformers: sm
            .upgrades
            .transformer
            .iter()
            .map(|&(j, z)| Upgrade {
                name: f.buses[j].id.clone(),
                upgraded: p[z.0] > 0.5,
                cost: f.buses[j].transformer.as_ref().map_or(0.0, |t| t.cost),
            })
            .collect(),
        lines: sm
            .upgrades
            .line_group
            .iter()
            .map(|&(g, z)| Upgrade {
                name: f.line_groups[g].name.clone(),
                upgraded: p[z.0] > 0.5,
                cost: f.line_groups[g].cost,
            })
            .collect(),
    };
    let mut bess: Vec<BessSize> = Vec::new();
    for u in &sm.bess.units {
        let id = &f.buses[u.bus].id;
        let (kw, kwh) = (p[u.kw.0].max(0.0), p[u.kwh.0].max(0.0));
        match bess.iter_mut().find(|b| &b.bus == id) {
            Some(b) => {
                b.kw += kw;
                b.kwh += kwh;
            }
            None => bess.push(BessSize { bus: id.clone(), kw, kwh, duration_h: 0.0 }),
        }
    }
    for b in &mut bess {
        b.duration_h = if b.kw > 1e-9 { b.kwh / b.kw } else { 0.0 };
    }
    let llf = &sm.llf;
    let price_signal = llf
        .prices
        .iter()
        .enumerate()
        .map(|(i, &(j, t))| PricePoint { bus: f.buses[j].id.clone(), t, price: o.x[i] })
        .collect();
    let zeros = vec![0.0; llf.num_prices()];
    let with_signal = investor_summary(llf.result(case, &o.y, &o.x));
    let no_signal = investor_summary(llf.result(case, &sm.no_signal.y, &zeros));
    let pe = &case.economics.planner;
    let growth = (1.0 + pe.r_e) * (1.0 + pe.r_c) / (1.0 + pe.wacc);
    let cashflow = CashflowSeries::from_parts(breakdown.capex(), breakdown.operating(), growth, pe.years);
    let verification = verify_outcome(case, o)?;
    let status = if o.solution.status == Status::Optimal { "optimal" } else { "limit" };
    let path = case_path.canonicalize().unwrap_or_else(|_| case_path.to_path_buf());
    Ok(ScenarioReport {
        case: CaseInfo {
            name: case.name.clone(),
            path: path.display().to_string(),
            hash: case.hash.clone(),
            horizon: case.series.steps,
            step_weight: case.series.step_weight(),
            years: pe.years,
            growth,
            pwf_planner: pwf_planner(case),
            pwf_investor: llf.pwf,
            provenance: case.provenance.clone(),
        },
        scenario: o.sm.kind.name().to_string(),
        solve: SolveSummary {
            status: status.into(),
            objective: o.solution.objective,
            bound: o.solution.bound,
            gap: o.solution.gap(),
            gap_target: cfg.gap,
            nodes: o.stats.nodes,
            escalations: o.escalations,
            elapsed_s: o.elapsed.as_secs_f64(),
            backend: backend_name(&cfg.backend),
            rows: sm.model.num_constraints(),
            columns: sm.model.num_vars(),
            binaries: sm.model.num_binaries(),
        },
        total_lcc: breakdown.total(),
        npv_vs_baseline: (o.sm.kind == ScenarioKind::Baseline).then_some(0.0),
        breakdown,
        upgrades,
        bess,
        der: with_signal.capacity.clone(),
        price_signal,
        investor: InvestorTable { no_signal, with_signal },
        cashflow,
        verification,
        lower_level: crate::verify::lower_level_point(o),
    })
}

/// Exit code for a written report: limits first, then failed checks.
pub fn report_exit_code(report: &ScenarioReport) -> u8 {
    if report.solve.status != "optimal" {
        EXIT_LIMIT
    } else if !report.verification.passed() {
        EXIT_VERIFICATION
    } else {
        EXIT_OK
    }
}
