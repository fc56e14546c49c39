//! Scenario report: lifecycle cost breakdown, planner and investor
//! decisions, the price signal, cashflow and verification results.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cashflow::CashflowSeries;
use crate::verify::Verification;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub transformer_upgrades: f64,
    pub line_upgrades: f64,
    pub bulk_energy: f64,
    pub demand_charges: f64,
    pub bess_capex: f64,
    pub der_payments: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.capex() + self.operating()
    }

    /// Year-zero spending.
    pub fn capex(&self) -> f64 {
        self.transformer_upgrades + self.line_upgrades + self.bess_capex
    }

    /// Discounted operating spending over the planning horizon.
    pub fn operating(&self) -> f64 {
        self.bulk_energy + self.demand_charges + self.der_payments
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Upgrade {
    pub name: String,
    pub upgraded: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Upgrades {
    pub transformers: Vec<Upgrade>,
    pub lines: Vec<Upgrade>,
}

impl Upgrades {
    pub fn transformers_upgraded(&self) -> usize {
        self.transformers.iter().filter(|u| u.upgraded).count()
    }

    pub fn lines_upgraded(&self) -> usize {
        self.lines.iter().filter(|u| u.upgraded).count()
    }

    pub fn count(&self) -> usize {
        self.transformers_upgraded() + self.lines_upgraded()
    }
}

/// Storage at one bus, summed over its phases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BessSize {
    pub bus: String,
    pub kw: f64,
    pub kwh: f64,
    /// Hours at rated power; zero when nothing is installed.
    pub duration_h: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DerCapacity {
    pub bus: String,
    pub kw: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub bus: String,
    pub t: usize,
    /// $/kWh paid for exports.
    pub price: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestorSummary {
    pub net_present_cost: f64,
    pub capex: f64,
    pub om: f64,
    pub energy_cost: f64,
    pub income: f64,
    pub savings: f64,
    pub exported_kwh: f64,
    pub capacity: Vec<DerCapacity>,
}

/// Investor economics at zero prices and at the scenario's prices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestorTable {
    pub no_signal: InvestorSummary,
    pub with_signal: InvestorSummary,
}

/// Lower-level solution kept for re-verification.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LowerLevelPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu_up: Vec<f64>,
    pub mu_lo: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub gap_target: f64,
    pub nodes: usize,
    pub escalations: usize,
    pub elapsed_s: f64,
    pub backend: String,
    pub rows: usize,
    pub columns: usize,
    pub binaries: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseInfo {
    pub name: String,
    pub path: String,
    pub hash: String,
    pub horizon: usize,
    /// Annual hours represented by one step.
    pub step_weight: f64,
    pub years: u32,
    /// Yearly growth of discounted operating cost.
    pub growth: f64,
    pub pwf_planner: f64,
    pub pwf_investor: f64,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub case: CaseInfo,
    pub scenario: String,
    pub solve: SolveSummary,
    pub total_lcc: f64,
    /// Set against a baseline report by `compare`; zero for the baseline.
    pub npv_vs_baseline: Option<f64>,
    pub breakdown: Breakdown,
    pub upgrades: Upgrades,
    pub bess: Vec<BessSize>,
    pub der: Vec<DerCapacity>,
    pub price_signal: Vec<PricePoint>,
    pub investor: InvestorTable,
    pub cashflow: CashflowSeries,
    pub verification: Verification,
    pub lower_level: LowerLevelPoint,
}

impl ScenarioReport {
    pub fn read(path: &Path) -> anyhow::Result<ScenarioReport> {
        let bytes = fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn is_solved(&self) -> bool {
        !self.lower_level.y.is_empty()
    }

    pub fn bess_kw(&self) -> f64 {
        self.bess.iter().map(|b| b.kw).sum::<f64>() + 0.0
    }

    pub fn bess_kwh(&self) -> f64 {
        self.bess.iter().map(|b| b.kwh).sum::<f64>() + 0.0
    }

    pub fn der_kw(&self) -> f64 {
        self.der.iter().map(|d| d.kw).sum::<f64>() + 0.0
    }
}
