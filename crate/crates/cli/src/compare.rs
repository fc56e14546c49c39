//! Side-by-side comparison of scenario reports on one case.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::report::ScenarioReport;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("need at least two reports, got {0}")]
    TooFew(usize),
    #[error("reports come from different cases ({0} vs {1})")]
    CaseMismatch(String, String),
    #[error("reports use different horizons ({0} vs {1} steps)")]
    HorizonMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub total_lcc: f64,
    pub npv: f64,
    pub transformer_upgrades: f64,
    pub line_upgrades: f64,
    pub bulk_energy: f64,
    pub demand_charges: f64,
    pub bess_capex: f64,
    pub der_payments: f64,
    pub transformers_upgraded: String,
    pub lines_upgraded: String,
    pub bess_kw: f64,
    pub bess_kwh: f64,
    pub der_kw: f64,
    pub investor_net_present_cost: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Scenario the net present values are measured against.
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Net present value of each report against the baseline report (or the
/// first one when there is none).
pub fn compare(reports: &[ScenarioReport]) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.case.hash != first.case.hash {
            return Err(CompareError::CaseMismatch(first.case.hash.clone(), r.case.hash.clone()));
        }
        if r.case.horizon != first.case.horizon {
            return Err(CompareError::HorizonMismatch(first.case.horizon, r.case.horizon));
        }
    }
    let base = reports.iter().find(|r| r.scenario == "baseline").unwrap_or(first);
    let rows = reports
        .iter()
        .map(|r| {
            let b = &r.breakdown;
            let u = &r.upgrades;
            ComparisonRow {
                scenario: r.scenario.clone(),
                total_lcc: r.total_lcc,
                npv: base.total_lcc - r.total_lcc,
                transformer_upgrades: b.transformer_upgrades,
                line_upgrades: b.line_upgrades,
                bulk_energy: b.bulk_energy,
                demand_charges: b.demand_charges,
                bess_capex: b.bess_capex,
                der_payments: b.der_payments,
                transformers_upgraded: format!("{}/{}", u.transformers_upgraded(), u.transformers.len()),
                lines_upgraded: format!("{}/{}", u.lines_upgraded(), u.lines.len()),
                bess_kw: r.bess_kw(),
                bess_kwh: r.bess_kwh(),
                der_kw: r.der_kw(),
                investor_net_present_cost: r.investor.with_signal.net_present_cost,
                gap: r.solve.gap,
            }
        })
        .collect();
    Ok(Comparison { baseline: base.scenario.clone(), rows })
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Table with one column per scenario, amounts in $M.
    pub fn to_text(&self) -> String {
        let m = |v: f64| format!("{:.3}", v / 1e6);
        let lines: Vec<(&str, Box<dyn Fn(&ComparisonRow) -> String>)> = vec![
            ("Total LCC ($M)", Box::new(move |r| m(r.total_lcc))),
            ("NPV ($M)", Box::new(move |r| m(r.npv))),
            ("Transformer upgrades ($M)", Box::new(move |r| m(r.transformer_upgrades))),
            ("Line upgrades ($M)", Box::new(move |r| m(r.line_upgrades))),
            ("Bulk energy ($M)", Box::new(move |r| m(r.bulk_energy))),
            ("Demand charges ($M)", Box::new(move |r| m(r.demand_charges))),
            ("BESS capex ($M)", Box::new(move |r| m(r.bess_capex))),
            ("DER payments ($M)", Box::new(move |r| m(r.der_payments))),
            ("Transformers upgraded", Box::new(|r| r.transformers_upgraded.clone())),
            ("Lines upgraded", Box::new(|r| r.lines_upgraded.clone())),
            ("BESS (kW)", Box::new(|r| format!("{:.1}", r.bess_kw))),
            ("BESS (kWh)", Box::new(|r| format!("{:.1}", r.bess_kwh))),
            ("DER (kW)", Box::new(|r| format!("{:.1}", r.der_kw))),
            ("Investor NPC ($M)", Box::new(move |r| m(r.investor_net_present_cost))),
            ("Gap", Box::new(|r| format!("{:.2e}", r.gap))),
        ];
        let mut s = format!("{:<28}", "");
        for r in &self.rows {
            let _ = write!(s, "{:>14}", r.scenario);
        }
        s.push('\n');
        for (label, f) in &lines {
            let _ = write!(s, "{label:<28}");
            for r in &self.rows {
                let _ = write!(s, "{:>14}", f(r));
            }
            s.push('\n');
        }
        s
    }
}
