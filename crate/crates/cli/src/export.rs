//! File exports from a solved report.

use nwa_core::{build_scenario, Case, ScenarioKind};
use nwa_lp::emit_model_file;
use thiserror::Error;

use crate::report::ScenarioReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    PriceSignalCsv,
    LpFile,
    InvestorTable,
}

impl ExportKind {
    pub fn parse(s: &str) -> Option<ExportKind> {
        match s {
            "price-signal-csv" => Some(ExportKind::PriceSignalCsv),
            "lp-file" => Some(ExportKind::LpFile),
            "investor-table" => Some(ExportKind::InvestorTable),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("report holds no solution")]
    Unsolved,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Scenario(#[from] nwa_core::scenario::ScenarioError),
}

/// `bus,t,price_usd_per_kwh`, one row per DER bus and step.
pub fn price_signal_csv(report: &ScenarioReport) -> Result<String, ExportError> {
    if !report.is_solved() {
        return Err(ExportError::Unsolved);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bus", "t", "price_usd_per_kwh"]).unwrap();
    for p in &report.price_signal {
        w.serialize((&p.bus, p.t, p.price)).unwrap();
    }
    Ok(String::from_utf8(w.into_inner().unwrap()).unwrap())
}

/// Investor economics without and with the price signal.
pub fn investor_table_csv(report: &ScenarioReport) -> Result<String, ExportError> {
    if !report.is_solved() {
        return Err(ExportError::Unsolved);
    }
    let (a, b) = (&report.investor.no_signal, &report.investor.with_signal);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item", "no_signal", "with_signal"]).unwrap();
    for (item, x, y) in [
        ("net_present_cost_usd", a.net_present_cost, b.net_present_cost),
        ("capex_usd", a.capex, b.capex),
        ("om_usd", a.om, b.om),
        ("energy_cost_usd", a.energy_cost, b.energy_cost),
        ("income_usd", a.income, b.income),
        ("savings_usd", a.savings, b.savings),
        ("exported_kwh", a.exported_kwh, b.exported_kwh),
    ] {
        w.serialize((item, x, y)).unwrap();
    }
    for (x, y) in a.capacity.iter().zip(&b.capacity) {
        w.serialize((format!("capacity_kw_{}", x.bus), x.kw, y.kw)).unwrap();
    }
    Ok(String::from_utf8(w.into_inner().unwrap()).unwrap())
}

/// The report's single-level model in the plain-text LP format.
pub fn lp_file(report: &ScenarioReport, case: &Case) -> Result<String, ExportError> {
    let kind = ScenarioKind::parse(&report.scenario).ok_or_else(|| ExportError::UnknownScenario(report.scenario.clone()))?;
    let sm = build_scenario(case, kind, None)?;
    Ok(emit_model_file(&sm.model))
}
