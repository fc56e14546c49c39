mod common;

use std::sync::OnceLock;

use common::bundled_day;
use nwa_core::powerflow::validate_power_balance;
use nwa_core::{solve_scenario, ScenarioKind, ScenarioOutcome, SolverConfig};
use nwa_lp::Status;

fn outcomes() -> &'static [ScenarioOutcome; 3] {
    static OUT: OnceLock<[ScenarioOutcome; 3]> = OnceLock::new();
    OUT.get_or_init(|| {
        let case = bundled_day();
        let cfg = SolverConfig::default();
        let base = solve_scenario(case, ScenarioKind::Baseline, &cfg, None).unwrap();
        let bess = solve_scenario(case, ScenarioKind::BessOnly, &cfg, None).unwrap();
        let der = solve_scenario(case, ScenarioKind::BessDer, &cfg, Some(&bess.warm_start())).unwrap();
        [base, bess, der]
    })
}

fn upgrades(o: &ScenarioOutcome) -> usize {
    o.sm.upgrade_vars().iter().filter(|z| o.solution.primal[z.0] > 0.5).count()
}

#[test]
fn every_scenario_solves_within_the_gap() {
    for o in outcomes() {
        assert_eq!(o.solution.status, Status::Optimal, "{}", o.sm.kind.name());
        let gap = (o.solution.objective - o.solution.bound) / o.solution.objective.abs();
        assert!(gap <= 0.02 + 1e-12, "{}: {gap}", o.sm.kind.name());
    }
}

#[test]
fn costs_fall_with_each_option() {
    let [base, bess, der] = outcomes();
    let (b, s, d) = (base.solution.objective, bess.solution.objective, der.solution.objective);
    assert!(b >= s * 1.01, "{b} {s}");
    assert!(s >= d * 1.01, "{s} {d}");
}

#[test]
fn upgrades_do_not_increase() {
    let [base, bess, der] = outcomes();
    let (b, s, d) = (upgrades(base), upgrades(bess), upgrades(der));
    assert_eq!(b, base.sm.upgrade_vars().len());
    assert!(b >= s && s >= d, "{b} {s} {d}");
}

#[test]
fn baseline_has_no_storage_or_payment() {
    let [base, bess, _] = outcomes();
    let p = &base.solution.primal;
    assert!(base.sm.bess.units.is_empty() || base.sm.bess.units.iter().all(|u| p[u.kw.0].abs() < 1e-9));
    for o in [base, bess] {
        assert!(o.sm.parts.der_payment.evaluate(&o.solution.primal).abs() < 1e-9);
        assert!(o.x.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn storage_dispatch_is_consistent() {
    let case = bundled_day();
    let eta = case.economics.planner.eta;
    let dt = case.series.step_hours;
    for o in &outcomes()[1..] {
        let p = &o.solution.primal;
        assert!(!o.sm.bess.units.is_empty());
        for u in &o.sm.bess.units {
            let (kw, kwh) = (p[u.kw.0], p[u.kwh.0]);
            assert!(kw >= -1e-9 && kwh >= -1e-9);
            let mut prev = 0.5 * kwh;
            for t in 0..case.series.steps {
                let (c, d, s) = (p[u.charge[t].0], p[u.discharge[t].0], p[u.soc[t].0]);
                assert!(c >= -1e-9 && d >= -1e-9);
                assert!(c + d <= kw + 1e-6);
                assert!(s >= -1e-6 && s <= kwh + 1e-6);
                assert!((s - (prev + eta * dt * c - dt * d / eta)).abs() < 1e-6);
                prev = s;
            }
            assert!((prev - 0.5 * kwh).abs() < 1e-6);
        }
    }
}

#[test]
fn power_balance_holds_at_the_optimum() {
    let case = bundled_day();
    for o in outcomes() {
        let r = validate_power_balance(case, &o.sm.flows, &o.sm.inj, &o.solution.primal, 1e-8).unwrap();
        assert!(r.pass, "{}: {r:?}", o.sm.kind.name());
    }
}

#[test]
fn head_terms_are_tight() {
    let case = bundled_day();
    let s = &case.series;
    for o in outcomes() {
        let p = &o.solution.primal;
        let h = &o.sm.head;
        for ph in 0..3 {
            for (t, &p0) in o.sm.flows.p_head[ph].iter().enumerate() {
                if s.lmp[t] > 0.0 {
                    assert!((p[h.p_plus[ph][t].0] - p[p0.0].max(0.0)).abs() < 1e-6);
                }
            }
        }
        for k in 0..s.num_periods() {
            if s.period_price[k] <= 0.0 {
                continue;
            }
            let peak = (0..s.steps)
                .filter(|&t| s.period_of[t] == k)
                .map(|t| (0..3).filter_map(|ph| o.sm.flows.p_head[ph].get(t)).map(|v| p[v.0]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((p[h.p_max[k].0] - peak.max(0.0)).abs() < 1e-6, "{} {k}", o.sm.kind.name());
        }
    }
}

#[test]
fn objective_is_the_sum_of_its_parts() {
    for o in outcomes() {
        let p = &o.solution.primal;
        let total = o.sm.parts.total().evaluate(p);
        assert!((total - o.solution.objective).abs() <= 1e-9 * o.solution.objective.abs());
    }
}

#[test]
fn signal_payment_matches_exports() {
    let der = &outcomes()[2];
    let llf = &der.sm.llf;
    let mut sxy = 0.0;
    for (b, cols) in llf.exp_col.iter().enumerate() {
        for (t, &k) in cols.iter().enumerate() {
            sxy += der.x[llf.price_of[b][t]] * der.y[k];
        }
    }
    let paid = der.sm.parts.der_payment.evaluate(&der.solution.primal);
    assert!(paid > 0.0);
    assert!((paid - der.sm.pwf_ul * sxy).abs() <= 1e-6 * paid);
    assert!(der.x.iter().all(|&x| x >= -1e-12 && x <= llf.price_cap + 1e-12));
}

#[test]
fn investor_response_is_optimal() {
    let der = &outcomes()[2];
    let llf = &der.sm.llf;
    let alone = llf.solve_at(&der.x).unwrap();
    let obj = llf.objective(&der.y, &der.x);
    assert!((obj - alone.objective).abs() <= 1e-5 * alone.objective.abs());
}
