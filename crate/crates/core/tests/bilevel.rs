mod common;

use common::toy;
use nwa_core::bilevel::{
    duals_for_response, payment_direct, payment_linearized, recover_price_signal, verify_kkt, verify_payment_identity,
    DualVars,
};
use nwa_core::investor::build_investor_lp;
use nwa_core::planner::pwf_planner;
use nwa_core::scenario::{solve_scenario, ScenarioKind, SolverConfig};

fn standalone(x: &[f64]) -> (nwa_core::investor::LowerLevelForm, Vec<f64>, DualVars) {
    let llf = build_investor_lp(&toy()).unwrap();
    let sol = llf.solve_at(x).unwrap();
    let duals = DualVars { lambda: sol.lambda, mu_up: sol.mu_up, mu_lo: sol.mu_lo };
    (llf, sol.y, duals)
}

#[test]
fn simplex_duals_satisfy_kkt() {
    for x in [[0.0, 0.0], [0.05, 0.02], [0.15, 0.15], [0.3, 0.0]] {
        let (llf, y, duals) = standalone(&x);
        let r = verify_kkt(&llf, &y, &x, &duals, 1e-6);
        assert!(r.pass, "{x:?}: {r:?}");
    }
}

#[test]
fn linearized_payment_equals_direct() {
    for x in [[0.05, 0.05], [0.1, 0.02], [0.15, 0.15]] {
        let (llf, y, duals) = standalone(&x);
        let direct = payment_direct(&llf, &y, &duals);
        let lin = payment_linearized(&llf, &y, &duals);
        assert!((direct - lin).abs() <= 1e-6 * direct.abs().max(1.0), "{x:?}: {direct} vs {lin}");
        // and both equal the investor's discounted export income
        let income = llf.result(&toy(), &y, &x).income;
        assert!((direct - income).abs() <= 1e-6 * income.abs().max(1.0));
    }
}

#[test]
fn prices_recovered_where_exports_are_interior() {
    // at 0.05 $/kWh the site fills to 40 kW; the first step exports nothing
    // (60 kW load), the second exports 26 of 36 kW
    let x = [0.05, 0.05];
    let (llf, y, duals) = standalone(&x);
    assert!((y[llf.cap_col[0]] - 40.0).abs() < 1e-6);
    let sig = recover_price_signal(&llf, &y, &x, &duals.lambda, 1e-6);
    assert_eq!(sig.entries.len(), 2);
    assert!(!sig.entries[0].interior);
    assert!(sig.entries[1].interior);
    assert_eq!((sig.interior_count, sig.mismatches), (1, 0));
    assert!((sig.entries[1].lambda - llf.pwf * 0.05).abs() < 1e-9);
    // the import-side dual of the first step is the retail price, skipped
    assert!((sig.entries[0].lambda - llf.pwf * 0.15).abs() < 1e-9);
    assert_eq!(sig.values(), vec![0.05, 0.05]);

    let mut off = duals.lambda.clone();
    off[llf.bal_row[0][1]] += 0.01;
    assert_eq!(recover_price_signal(&llf, &y, &x, &off, 1e-6).mismatches, 1);
}

#[test]
fn perturbed_duals_fail_stationarity() {
    let x = [0.05, 0.05];
    let (llf, y, mut duals) = standalone(&x);
    duals.lambda[0] += 0.1;
    let r = verify_kkt(&llf, &y, &x, &duals, 1e-6);
    assert!(!r.pass && !r.stationarity_ok);
    assert!((r.stationarity - 0.1).abs() < 1e-9, "{}", r.stationarity);
    assert!(r.primal_ok);
}

#[test]
fn negative_multiplier_is_flagged() {
    let x = [0.05, 0.05];
    let (llf, y, mut duals) = standalone(&x);
    duals.mu_lo[0] -= 1.0;
    duals.mu_up[0] -= 1.0;
    let r = verify_kkt(&llf, &y, &x, &duals, 1e-6);
    assert!(r.stationarity_ok && !r.dual_sign_ok && !r.pass);
}

#[test]
fn certificate_for_suboptimal_response_leaves_a_residual() {
    let x = [0.05, 0.05];
    let (llf, y, _) = standalone(&x);
    let duals = duals_for_response(&llf, &y, &x).unwrap();
    assert!(verify_kkt(&llf, &y, &x, &duals, 1e-9).pass);

    // no DER at all: import everything, produce nothing
    let mut idle = vec![0.0; llf.num_cols()];
    for t in 0..llf.steps {
        idle[llf.imp_col[0][t]] = llf.w[llf.bal_row[0][t]];
    }
    assert!(llf.max_violation(&idle) < 1e-9);
    let duals = duals_for_response(&llf, &idle, &x).unwrap();
    let r = verify_kkt(&llf, &idle, &x, &duals, 1e-6);
    assert!(!r.pass && r.primal_ok);
}

#[test]
fn payment_identity_scales_by_discount_ratio() {
    let x = [0.05, 0.05];
    let (llf, y, duals) = standalone(&x);
    let lin = payment_linearized(&llf, &y, &duals);
    let r = verify_payment_identity(&llf, &y, &x, lin, llf.pwf, llf.pwf, 1e-9);
    assert!(r.pass);
    assert!((r.planner_payment - r.investor_income).abs() < 1e-9 * r.investor_income);
    let a = pwf_planner(&toy());
    let r = verify_payment_identity(&llf, &y, &x, lin, a, llf.pwf, 1e-9);
    assert!(r.pass, "{r:?}");
    assert!((r.planner_payment / r.investor_income - a / llf.pwf).abs() < 1e-12);
    let r = verify_payment_identity(&llf, &y, &x, lin * 1.01, a, llf.pwf, 1e-6);
    assert!(!r.pass);
}

#[test]
fn toy_bilevel_end_to_end() {
    let case = toy();
    let cfg = SolverConfig { gap: 1e-9, ..Default::default() };
    let out = solve_scenario(&case, ScenarioKind::BessDer, &cfg, None).unwrap();
    let llf = &out.sm.llf;
    let kkt = verify_kkt(llf, &out.y, &out.x, &out.duals, 1e-6);
    assert!(kkt.pass, "{kkt:?}");
    let sig = recover_price_signal(llf, &out.y, &out.x, &out.duals.lambda, 1e-6);
    assert_eq!(sig.mismatches, 0);
    // the investor's response is optimal at the chosen prices
    let alone = llf.solve_at(&out.x).unwrap();
    let obj = llf.objective(&out.y, &out.x);
    assert!((obj - alone.objective).abs() <= 1e-5 * alone.objective.abs().max(1.0));
    // matches the exhaustive search through the break-even price
    assert!((out.solution.objective - 194_842.88).abs() < 1e-6 * 194_842.88, "{}", out.solution.objective);
    let lin = payment_linearized(llf, &out.y, &out.duals);
    let pay = verify_payment_identity(llf, &out.y, &out.x, lin, out.sm.pwf_ul, llf.pwf, 1e-6);
    assert!(pay.pass, "{pay:?}");
}
