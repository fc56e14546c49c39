mod common;

use std::path::Path;

use common::{toy_path, toy_variant};
use nwa_cli::export::{investor_table_csv, lp_file, price_signal_csv, ExportError};
use nwa_cli::report::ScenarioReport;
use nwa_cli::{cashflow, compare, load_with_horizon, run_scenario, CashflowSeries, CompareError, RunError};
use nwa_core::{ScenarioKind, SolverConfig};
use nwa_lp::parse_model_file;

fn tight() -> SolverConfig {
    SolverConfig { gap: 1e-9, ..Default::default() }
}

fn toy_report(path: &Path, kind: ScenarioKind) -> ScenarioReport {
    let case = load_with_horizon(path, None).unwrap();
    run_scenario(&case, path, kind, &tight(), None).unwrap().0
}

fn with_lcc(scenario: &str, lcc: f64) -> ScenarioReport {
    let mut r = ScenarioReport { scenario: scenario.into(), total_lcc: lcc, ..Default::default() };
    r.case.hash = "h".into();
    r.case.horizon = 2;
    r
}

#[test]
fn one_year_without_discounting_is_the_raw_cost() {
    let cf = CashflowSeries::from_parts(100.0, 50.0, 1.0, 1);
    assert_eq!(cf.years.len(), 2);
    assert_eq!((cf.years[0].capex, cf.years[0].operating), (100.0, 0.0));
    assert_eq!((cf.years[1].capex, cf.years[1].operating), (0.0, 50.0));
    assert_eq!(cf.annual_operating, 50.0);
}

#[test]
fn discounted_years_sum_to_the_operating_total() {
    let g = 1.03 * 1.03 / 1.10;
    let cf = CashflowSeries::from_parts(2.0e6, 6.0e6, g, 20);
    assert_eq!(cf.years.len(), 21);
    assert!((cf.total() - 8.0e6).abs() <= 1e-9 * 8.0e6);
    for w in cf.years[1..].windows(2) {
        assert!((w[1].operating / w[0].operating - g).abs() < 1e-12);
    }
    let csv = cf.to_csv();
    assert!(csv.starts_with("year,capex_usd,operating_usd,total_usd\n0,2000000"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn net_present_value_against_the_baseline() {
    let rs = [with_lcc("baseline", 8.41e6), with_lcc("bess", 6.43e6), with_lcc("bess-der", 5.42e6)];
    let c = compare(&rs).unwrap();
    assert_eq!(c.baseline, "baseline");
    let npv: Vec<f64> = c.rows.iter().map(|r| r.npv).collect();
    assert_eq!(npv[0], 0.0);
    assert!((npv[1] - 1.98e6).abs() < 1e-6);
    assert!((npv[2] - 2.99e6).abs() < 1e-6);
    assert_eq!(c.to_csv().lines().count(), 4);
    assert!(c.to_text().contains("NPV ($M)"));
}

#[test]
fn identical_reports_have_zero_value() {
    let c = compare(&[with_lcc("bess", 5.0e6), with_lcc("bess", 5.0e6)]).unwrap();
    assert!(c.rows.iter().all(|r| r.npv == 0.0));
}

#[test]
fn mixed_cases_are_refused() {
    let mut other = with_lcc("bess", 1.0);
    other.case.hash = "g".into();
    assert!(matches!(compare(&[with_lcc("baseline", 2.0), other]), Err(CompareError::CaseMismatch(..))));
    let mut short = with_lcc("bess", 1.0);
    short.case.horizon = 1;
    assert_eq!(compare(&[with_lcc("baseline", 2.0), short]), Err(CompareError::HorizonMismatch(2, 1)));
    assert_eq!(compare(&[with_lcc("baseline", 2.0)]), Err(CompareError::TooFew(1)));
}

#[test]
fn toy_report_is_complete() {
    let r = toy_report(&toy_path(), ScenarioKind::BessDer);
    assert_eq!(r.scenario, "bess-der");
    assert_eq!(r.solve.status, "optimal");
    assert!((r.breakdown.total() - r.solve.objective).abs() <= 1e-6 * r.solve.objective);
    assert_eq!(r.total_lcc, r.breakdown.total());
    assert!((cashflow(&r).total() - r.total_lcc).abs() <= 1e-6 * r.total_lcc);
    assert_eq!(r.cashflow, cashflow(&r));
    assert_eq!(r.case.hash.len(), 64);
    assert_eq!(r.price_signal.len(), 2);
    assert_eq!(r.der.len(), 1);
    assert!(r.verification.passed(), "{:?}", r.verification.failures());
    assert!(r.verification.signal_active);
    // the signal lets exports relieve the line instead of upgrading it
    assert_eq!(r.upgrades.count(), 0);
    assert!(r.breakdown.der_payments > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    r.write(&file).unwrap();
    assert_eq!(ScenarioReport::read(&file).unwrap(), r);
}

#[test]
fn investor_is_never_worse_off() {
    let base = toy_report(&toy_path(), ScenarioKind::Baseline);
    let der = toy_report(&toy_path(), ScenarioKind::BessDer);
    let (b, d) = (base.investor.with_signal.net_present_cost, der.investor.with_signal.net_present_cost);
    assert!(d <= b + 1e-6 * b.abs(), "{d} > {b}");
    assert!((der.investor.no_signal.net_present_cost - b).abs() <= 1e-9 * b.abs());
}

#[test]
fn zero_signal_exports_are_all_zero() {
    let r = toy_report(&toy_path(), ScenarioKind::Baseline);
    let csv = price_signal_csv(&r).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bus,t,price_usd_per_kwh"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows, ["1,0,0.0", "1,1,0.0"]);
    assert_eq!(r.breakdown.der_payments, 0.0);
    assert_eq!(r.npv_vs_baseline, Some(0.0));
}

#[test]
fn investor_table_lists_both_columns() {
    let r = toy_report(&toy_path(), ScenarioKind::BessDer);
    let csv = investor_table_csv(&r).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0], ["item", "no_signal", "with_signal"]);
    let npc = rows.iter().find(|r| r[0] == "net_present_cost_usd").unwrap();
    let (a, b): (f64, f64) = (npc[1].parse().unwrap(), npc[2].parse().unwrap());
    assert!((a - b).abs() <= 1e-4 * a.abs());
    assert!(rows.iter().any(|r| r[0] == "capacity_kw_1"));
    assert!(matches!(investor_table_csv(&ScenarioReport::default()), Err(ExportError::Unsolved)));
    assert!(matches!(price_signal_csv(&ScenarioReport::default()), Err(ExportError::Unsolved)));
}

#[test]
fn model_file_round_trips() {
    let r = toy_report(&toy_path(), ScenarioKind::BessDer);
    let case = nwa_cli::load_report_case(&r).unwrap();
    let text = lp_file(&r, &case).unwrap();
    let m = parse_model_file(&text).unwrap();
    let sm = nwa_core::build_scenario(&case, ScenarioKind::BessDer, None).unwrap();
    assert_eq!(m.num_vars(), sm.model.num_vars());
    assert_eq!(m.num_constraints(), sm.model.num_constraints());
    assert_eq!(m.num_binaries(), sm.model.num_binaries());
}

#[test]
fn zero_load_costs_nothing_anywhere() {
    let toy = toy_variant([0.0, 0.0], true);
    for kind in ScenarioKind::ALL {
        let r = toy_report(&toy.path, kind);
        assert!(r.total_lcc.abs() < 1e-6, "{}: {}", kind.name(), r.total_lcc);
        assert_eq!(r.upgrades.count(), 0);
        assert!(r.der_kw().abs() < 1e-9 && r.bess_kw().abs() < 1e-9);
    }
}

#[test]
fn missing_upgrade_or_infeasible_plan_is_reported() {
    let toy = toy_variant([60.0, 10.0], false);
    let case = load_with_horizon(&toy.path, None).unwrap();
    let err = run_scenario(&case, &toy.path, ScenarioKind::Baseline, &tight(), None).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    let err = run_scenario(&case, &toy.path, ScenarioKind::BessOnly, &tight(), None).unwrap_err();
    assert!(matches!(err, RunError::Infeasible("bess")), "{err}");
    // the price signal buys enough exports to keep the line within rating
    let (r, _) = run_scenario(&case, &toy.path, ScenarioKind::BessDer, &tight(), None).unwrap();
    assert!(r.verification.passed());
}

#[test]
fn changed_case_file_is_detected() {
    let toy = toy_variant([60.0, 10.0], true);
    let r = toy_report(&toy.path, ScenarioKind::BessOnly);
    std::fs::write(toy.dir.path().join("loads.csv"), "bus,phase,t0,t1\n1,a,61,10\n").unwrap();
    assert!(matches!(nwa_cli::load_report_case(&r), Err(RunError::CaseChanged { .. })));
}
