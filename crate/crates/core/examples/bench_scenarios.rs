//! Solves the three scenarios of a case and prints timings.
//!
//! ```text
//! cargo run --release -p nwa-core --example bench_scenarios -- crates/core/data/ieee13_synth.json 24
//! ```

use std::path::PathBuf;
use std::time::Instant;

use nwa_core::bilevel::{payment_direct, payment_linearized, recover_price_signal, verify_kkt, verify_payment_identity};
use nwa_core::network::overload_report;
use nwa_core::{load_case, solve_scenario, ScenarioKind, SolverConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "crates/core/data/ieee13_synth.json".into()));
    let mut case = load_case(&path).expect("load case");
    if let Some(h) = args.next() {
        case = case.with_horizon(h.parse().expect("horizon")).expect("horizon");
    }
    for e in overload_report(&case) {
        println!("{:<14} peak {:>8.2} rating {:>8.2} {:>6.1}%", e.name, e.peak_kw, e.rating_kw, e.percent);
    }
    let limit: u64 = std::env::var("BENCH_LIMIT").ok().and_then(|v| v.parse().ok()).unwrap_or(600);
    let cfg = SolverConfig { time_limit: Some(std::time::Duration::from_secs(limit)), ..SolverConfig::default() };
    let mut warm = None;
    let only = std::env::var("BENCH_ONLY").ok().and_then(|s| ScenarioKind::parse(&s));
    for kind in [ScenarioKind::Baseline, ScenarioKind::BessOnly, ScenarioKind::BessDer] {
        if only.is_some_and(|k| k != kind) {
            continue;
        }
        let t = Instant::now();
        let o = solve_scenario(&case, kind, &cfg, warm.as_ref()).expect("solve");
        println!(
            "{:<9} status {:?} obj {:.2} bound {:.2} nodes {} esc {} rows {} cols {} bins {} time {:.1}s",
            kind.name(),
            o.solution.status,
            o.solution.objective,
            o.solution.bound,
            o.stats.nodes,
            o.escalations,
            o.sm.model.num_constraints(),
            o.sm.model.num_vars(),
            o.sm.model.num_binaries(),
            t.elapsed().as_secs_f64()
        );
        if !o.solution.has_point() {
            continue;
        }
        let ups: Vec<f64> = o.sm.upgrade_vars().iter().map(|z| o.solution.primal[z.0]).collect();
        println!("  upgrades {ups:?}");
        let llf = &o.sm.llf;
        let kkt = verify_kkt(llf, &o.y, &o.x, &o.duals, 1e-6);
        let lin = payment_linearized(llf, &o.y, &o.duals);
        let direct = payment_direct(llf, &o.y, &o.duals);
        let pay = verify_payment_identity(llf, &o.y, &o.x, lin, o.sm.pwf_ul, llf.pwf, 1e-6);
        let sig = recover_price_signal(llf, &o.y, &o.x, &o.duals.lambda, 1e-6);
        let inv = llf.objective(&o.y, &o.x);
        let argmin = llf.solve_at(&o.x).expect("argmin");
        println!(
            "  kkt stat {:.2e} primal {:.2e} sign {:.2e} comp {:.2e}; lin {:.4} direct {:.4}; pay gap {:.2e}; price max {:.2e} interior {} mism {}",
            kkt.stationarity, kkt.primal, kkt.dual_sign, kkt.complementarity, lin, direct, pay.relative_gap,
            sig.max_interior_residual, sig.interior_count, sig.mismatches
        );
        println!(
            "  investor {:.4} argmin {:.4} no-signal {:.4} rel {:.2e}; income {:.2}",
            inv, argmin.objective, o.sm.no_signal.objective,
            (inv - o.sm.no_signal.objective).abs() / o.sm.no_signal.objective.abs(), pay.investor_income
        );
        if kind == ScenarioKind::BessOnly {
            warm = Some(o.warm_start());
        }
    }
}
