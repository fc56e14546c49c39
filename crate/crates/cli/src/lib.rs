//! Scenario runs, reports, comparisons and exports behind the `nwa` binary.

pub mod cashflow;
pub mod compare;
pub mod export;
pub mod report;
pub mod run;
pub mod verify;

pub use cashflow::{cashflow, CashflowSeries};
pub use compare::{compare, Comparison, CompareError};
pub use report::ScenarioReport;
pub use run::{load_report_case, load_with_horizon, report_exit_code, run_scenario, RunError};
pub use verify::{verify_lower_level, Verification};
