//! Year-by-year spending: capital in year zero, discounted operating cost
//! afterwards.

use serde::{Deserialize, Serialize};

use crate::report::ScenarioReport;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CashflowYear {
    pub year: u32,
    pub capex: f64,
    pub operating: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CashflowSeries {
    /// Undiscounted operating cost of the modeled year.
    pub annual_operating: f64,
    pub years: Vec<CashflowYear>,
}

impl CashflowSeries {
    /// Spreads a discounted operating total over `years` years growing by
    /// `growth` per year, so that the years sum back to `operating_total`.
    pub fn from_parts(capex: f64, operating_total: f64, growth: f64, years: u32) -> CashflowSeries {
        let factor: f64 = (1..=years).map(|y| growth.powi(y as i32)).sum();
        let annual = if factor > 0.0 { operating_total / factor } else { 0.0 };
        let mut out = vec![CashflowYear { year: 0, capex, operating: 0.0 }];
        for y in 1..=years {
            out.push(CashflowYear { year: y, capex: 0.0, operating: annual * growth.powi(y as i32) });
        }
        CashflowSeries { annual_operating: annual, years: out }
    }

    pub fn total(&self) -> f64 {
        self.years.iter().map(|y| y.capex + y.operating).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["year", "capex_usd", "operating_usd", "total_usd"]).unwrap();
        for y in &self.years {
            w.serialize((y.year, y.capex, y.operating, y.capex + y.operating)).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn cashflow(report: &ScenarioReport) -> CashflowSeries {
    let b = &report.breakdown;
    CashflowSeries::from_parts(b.capex(), b.operating(), report.case.growth, report.case.years)
}
