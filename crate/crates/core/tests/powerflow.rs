mod common;

use common::{bundled_day, chain};
use nwa_core::load_case;
use nwa_core::powerflow::{build_lindistflow, sensitivity_from_pu, validate_power_balance, Injections};
use nwa_lp::{solve_lp, LinExpr, Model, Status};
use num_complex::Complex64;

fn solve_flows(case: &nwa_core::Case) -> (Model, nwa_core::powerflow::FlowHandles, Injections, Vec<f64>) {
    let mut m = Model::new();
    let inj = Injections::from_loads(case);
    let flows = build_lindistflow(&mut m, case, &inj).unwrap();
    m.set_objective(LinExpr::new()).unwrap();
    let sol = solve_lp(&m).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    (m, flows, inj, sol.primal)
}

#[test]
fn two_bus_hand_solution() {
    // 100 kW at bus 1, z = 0.01 + j0.02 pu on a 1 MW base
    let dir = chain(&[vec![100.0]], 0.01, 0.02, None, None);
    let case = load_case(&dir.path).unwrap();
    let (_, flows, _, x) = solve_flows(&case);
    assert!((x[flows.p_line[0][0][0].0] - 100.0).abs() < 1e-9);
    assert!(x[flows.q_line[0][0][0].0].abs() < 1e-9);
    let v1 = x[flows.v[1][0][0].0];
    assert!((v1 - (1.0 - 2.0 * 0.01 * 0.1)).abs() < 1e-9, "{v1}");
    assert!((v1 - 0.998).abs() < 1e-9);
    assert!((x[flows.p_head[0][0].0] - 100.0).abs() < 1e-9);
}

#[test]
fn zero_load_gives_flat_profile() {
    let dir = chain(&[vec![0.0, 0.0], vec![0.0, 0.0]], 0.01, 0.02, None, None);
    let case = load_case(&dir.path).unwrap();
    let (_, flows, _, x) = solve_flows(&case);
    for k in 0..2 {
        for t in 0..2 {
            assert!(x[flows.p_line[k][0][t].0].abs() < 1e-12);
            assert!((x[flows.v[k + 1][0][t].0] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn voltage_falls_along_uniform_feeder() {
    let loads: Vec<Vec<f64>> = (0..4).map(|i| vec![20.0 + 5.0 * i as f64, 0.0, 40.0]).collect();
    let dir = chain(&loads, 0.005, 0.01, None, None);
    let case = load_case(&dir.path).unwrap();
    let (_, flows, _, x) = solve_flows(&case);
    for t in 0..3 {
        let mut prev = 1.0;
        for j in 1..=4 {
            let v = x[flows.v[j][0][t].0];
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }
}

#[test]
fn balance_validation_flags_perturbed_flow() {
    let dir = chain(&[vec![30.0, 10.0], vec![20.0, 5.0]], 0.01, 0.02, None, None);
    let case = load_case(&dir.path).unwrap();
    let (_, flows, inj, mut x) = solve_flows(&case);
    let ok = validate_power_balance(&case, &flows, &inj, &x, 1e-8).unwrap();
    assert!(ok.pass && ok.max_balance <= 1e-8 && ok.max_voltage <= 1e-8);
    x[flows.p_line[1][0][1].0] += 1.0;
    let bad = validate_power_balance(&case, &flows, &inj, &x, 1e-8).unwrap();
    assert!(!bad.pass);
    assert!((bad.max_balance - 1.0).abs() < 1e-9);
    let (bus, _, t) = bad.worst_balance.unwrap();
    assert!(bus == "1" || bus == "2");
    assert_eq!(t, 1);
    assert!(validate_power_balance(&case, &flows, &inj, &x[..1], 1e-8).is_err());
}

#[test]
fn bundled_structure_and_conservation() {
    let case = bundled_day();
    let f = &case.feeder;
    let steps = case.series.steps;
    let mut m = Model::new();
    let inj = Injections::from_loads(case);
    build_lindistflow(&mut m, case, &inj).unwrap();
    let node_phases: usize = f.buses.iter().map(|b| b.num_phases()).sum();
    let line_phases: usize = f.lines.iter().map(|l| l.phase_list().len()).sum();
    assert_eq!(m.num_constraints(), 2 * node_phases * steps + line_phases * steps);

    // relax ratings so the loads-only model is feasible
    let mut relaxed = case.clone();
    for l in &mut relaxed.feeder.lines {
        l.rating_kw = l.rating_kw.map(|r| r * 10.0);
    }
    let (_, flows, inj, x) = solve_flows(&relaxed);
    let report = validate_power_balance(&relaxed, &flows, &inj, &x, 1e-8).unwrap();
    assert!(report.pass, "{report:?}");
    for p in 0..3 {
        for t in 0..steps {
            let load: f64 = (0..f.buses.len()).filter_map(|j| case.series.load_p[j][p].get(t)).sum();
            assert!((x[flows.p_head[p][t].0] - load).abs() < 1e-6);
        }
    }
}

#[test]
fn balanced_line_sensitivity() {
    let (r, xl) = (0.03, 0.07);
    let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        z[p][p] = Complex64::new(r, xl);
    }
    let m = sensitivity_from_pu(&z, [true; 3]);
    for p in 0..3 {
        assert!((m.mp[p][p] + 2.0 * r).abs() < 1e-15);
        assert!((m.mq[p][p] + 2.0 * xl).abs() < 1e-15);
        for q in 0..3 {
            if q != p {
                assert_eq!(m.mp[p][q], 0.0);
            }
        }
    }
}
