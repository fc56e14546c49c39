//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nwa_cli::{run_scenario, ScenarioReport};
use nwa_core::oracle::{bilevel_oracle, uniform_grid};
use nwa_core::planner::pwf;
use nwa_core::powerflow::{build_lindistflow, Injections};
use nwa_core::scenario::WarmStart;
use nwa_core::{load_case, solve_scenario, Backend, Case, ScenarioKind, SolverConfig};
use nwa_lp::{simplex, solve_lp, solve_milp, standard_form, BnbOptions, LinExpr, Model, Sense, Status, VarId};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

const SEPARATION: f64 = 0.01;
const GAP: f64 = 0.02;
const RUNTIME_S: f64 = 600.0;
const PRICE_TOL: f64 = 1e-6;
const PAYMENT_TOL: f64 = 1e-6;
const LINEARIZATION_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-6;
const ARGMIN_TOL: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-4;
const ORACLE_RUNTIME_S: f64 = 60.0;
const INDIFFERENCE_TOL: f64 = 1e-4;
const PWF_TOL: f64 = 1e-3;
const FLOW_TOL: f64 = 1e-9;
const BALANCE_TOL: f64 = 1e-8;
const LP_TOL: f64 = 1e-8;
const BACKEND_TOL: f64 = 1e-6;
const BESS_TOL: f64 = 1e-6;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

struct Line {
    number: usize,
    pass: bool,
    detail: String,
}

fn line(number: usize, pass: bool, detail: String) -> Line {
    Line { number, pass, detail }
}

struct Bundled {
    reports: Vec<ScenarioReport>,
    elapsed_s: f64,
    error: Option<String>,
}

fn run_bundled() -> Bundled {
    let path = data("ieee13_synth.json");
    let start = Instant::now();
    let case = match load_case(&path) {
        Ok(c) => c,
        Err(e) => return Bundled { reports: Vec::new(), elapsed_s: 0.0, error: Some(e.to_string()) },
    };
    let cfg = SolverConfig::default();
    let mut reports = Vec::new();
    let mut warm: Option<WarmStart> = None;
    for kind in ScenarioKind::ALL {
        match run_scenario(&case, &path, kind, &cfg, warm.as_ref()) {
            Ok((r, o)) => {
                if kind == ScenarioKind::BessOnly {
                    warm = Some(o.warm_start());
                }
                eprintln!("  {} solved: LCC {:.2}, gap {:.2e}, {:.1}s", r.scenario, r.total_lcc, r.solve.gap, r.solve.elapsed_s);
                reports.push(r);
            }
            Err(e) => {
                return Bundled { reports, elapsed_s: start.elapsed().as_secs_f64(), error: Some(e.to_string()) };
            }
        }
    }
    Bundled { reports, elapsed_s: start.elapsed().as_secs_f64(), error: None }
}

fn scenario_lines(b: &Bundled) -> Vec<Line> {
    if let Some(e) = &b.error {
        return [1, 2, 3, 4, 5, 6, 8, 12].iter().map(|&n| line(n, false, format!("bundled run failed: {e}"))).collect();
    }
    let r = &b.reports;
    let (base, bess, der) = (&r[0], &r[1], &r[2]);
    let mut out = Vec::new();

    let margin = SEPARATION * base.total_lcc;
    let worst_gap = r.iter().map(|x| x.solve.gap).fold(0.0, f64::max);
    let pass = bess.total_lcc <= base.total_lcc - margin
        && der.total_lcc <= bess.total_lcc - margin
        && worst_gap <= GAP
        && b.elapsed_s <= RUNTIME_S;
    out.push(line(
        1,
        pass,
        format!(
            "LCC baseline {:.0} / bess {:.0} / bess-der {:.0}, separations {:.2}% and {:.2}% (min {:.0}%), worst gap {:.2e} (max {GAP}), {:.1}s (max {RUNTIME_S}s)",
            base.total_lcc,
            bess.total_lcc,
            der.total_lcc,
            100.0 * (base.total_lcc - bess.total_lcc) / base.total_lcc,
            100.0 * (bess.total_lcc - der.total_lcc) / base.total_lcc,
            100.0 * SEPARATION,
            worst_gap,
            b.elapsed_s
        ),
    ));

    let counts: Vec<usize> = r.iter().map(|x| x.upgrades.count()).collect();
    let total = base.upgrades.transformers.len() + base.upgrades.lines.len();
    out.push(line(
        2,
        counts.windows(2).all(|w| w[1] <= w[0]),
        format!("upgrades {}/{total}, {}/{total}, {}/{total}", counts[0], counts[1], counts[2]),
    ));

    let pr = &der.verification.price_recovery;
    out.push(line(
        3,
        pr.mismatches == 0 && der.verification.signal_active,
        format!(
            "bess-der: {} interior exports, {} mismatches, max residual {:.2e} (tol {PRICE_TOL:e}(1+|lambda|))",
            pr.interior, pr.mismatches, pr.max_residual
        ),
    ));

    let pay = &der.verification.payment;
    let ratio = der.case.pwf_planner / der.case.pwf_investor;
    let expected = ratio * der.investor.with_signal.income;
    let report_gap = (der.breakdown.der_payments - expected).abs() / expected.abs().max(1.0);
    out.push(line(
        4,
        pay.relative_gap <= PAYMENT_TOL && report_gap <= PAYMENT_TOL,
        format!(
            "bess-der: payment {:.2} vs {:.4} x income {:.2}, gaps {:.2e} and {:.2e} (tol {PAYMENT_TOL:e})",
            der.breakdown.der_payments, ratio, der.investor.with_signal.income, report_gap, pay.relative_gap
        ),
    ));

    let lin: Vec<f64> = r.iter().map(|x| x.verification.linearization.relative_gap).collect();
    out.push(line(
        5,
        lin.iter().all(|&g| g <= LINEARIZATION_TOL),
        format!(
            "relative gaps baseline {:.2e}, bess {:.2e}, bess-der {:.2e} (tol {LINEARIZATION_TOL:e})",
            lin[0], lin[1], lin[2]
        ),
    ));

    let k = &der.verification.kkt;
    let a = &der.verification.argmin;
    let worst = k.stationarity.max(k.primal).max(k.complementarity);
    out.push(line(
        6,
        worst <= KKT_TOL && k.dual_sign <= KKT_TOL && a.relative_gap <= ARGMIN_TOL,
        format!(
            "bess-der: stationarity {:.2e}, primal {:.2e}, dual sign {:.2e}, complementarity {:.2e} (tol {KKT_TOL:e}), argmin gap {:.2e} (tol {ARGMIN_TOL:e})",
            k.stationarity, k.primal, k.dual_sign + 0.0, k.complementarity, a.relative_gap
        ),
    ));

    let ind = &der.verification.indifference;
    out.push(line(
        8,
        ind.relative_gap <= INDIFFERENCE_TOL,
        format!(
            "investor NPC no signal {:.2}, with signal {:.2}, gap {:.2e} (tol {INDIFFERENCE_TOL:e})",
            ind.no_signal, ind.with_signal, ind.relative_gap
        ),
    ));

    let mut worst_bess: f64 = 0.0;
    let mut pass = true;
    for x in r {
        match &x.verification.bess {
            Some(c) => {
                worst_bess = worst_bess.max(c.soc_recursion).max(c.terminal).max(c.power).max(c.energy);
                pass &= c.pass;
            }
            None => pass = false,
        }
    }
    out.push(line(
        12,
        pass,
        format!("worst SOC/terminal/power/energy residual {worst_bess:.2e} kWh or kW (tol {BESS_TOL:e} x (1 + rating))"),
    ));
    out
}

fn toy_oracle() -> Line {
    let case = match load_case(&data("toy2.json")) {
        Ok(c) => c,
        Err(e) => return line(7, false, e.to_string()),
    };
    let start = Instant::now();
    let cfg = SolverConfig { gap: 1e-9, ..Default::default() };
    let milp = match solve_scenario(&case, ScenarioKind::BessDer, &cfg, None) {
        Ok(o) => o,
        Err(e) => return line(7, false, e.to_string()),
    };
    let cap = milp.sm.llf.price_cap;
    let intervals = 30;
    let oracle = match bilevel_oracle(&case, &uniform_grid(cap, intervals)) {
        Ok(o) => o,
        Err(e) => return line(7, false, e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let delta = cap / intervals as f64;
    let llf = &milp.sm.llf;
    let max_exports: f64 = llf.exp_col.iter().flatten().map(|&k| llf.ub[k]).sum();
    let resolution = milp.sm.pwf_ul * delta * max_exports;
    let z = milp.solution.objective;
    let tol = ORACLE_TOL * z.abs().max(1.0);
    let pass = oracle.cost >= z - tol && oracle.cost <= z + resolution + tol && elapsed <= ORACLE_RUNTIME_S;
    line(
        7,
        pass,
        format!(
            "MILP {z:.2}, oracle {:.2} over {} points, allowed [{:.2}, {:.2}], {elapsed:.2}s (max {ORACLE_RUNTIME_S}s)",
            oracle.cost,
            oracle.evaluations,
            z - tol,
            z + resolution + tol
        ),
    )
}

fn pwf_line() -> Line {
    let sum = |d: f64| (1..=20).map(|y| (1.03f64 * 1.03 / (1.0 + d)).powi(y)).sum::<f64>();
    let (ll, ul) = (pwf(0.03, 0.03, 0.15, 20), pwf(0.03, 0.03, 0.10, 20));
    let pass = (ll - 9.534).abs() <= PWF_TOL
        && (ul - 13.977).abs() <= PWF_TOL
        && (ll - sum(0.15)).abs() <= 1e-12
        && (ul - sum(0.10)).abs() <= 1e-12;
    line(9, pass, format!("pwf(0.15) = {ll:.4}, pwf(0.10) = {ul:.4} (targets 9.534 and 13.977, tol {PWF_TOL:e})"))
}

/// Bus `s` feeding 100 kW at bus 1 through z = 0.01 + j0.02 pu on 1 kV, 1000 kVA bases.
fn two_bus_case(dir: &Path) -> PathBuf {
    let z = json!({"re": [[0.01, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], "im": [[0.02, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]});
    let doc = json!({
        "name": "two-bus",
        "substation": "s",
        "base_kv": 1.0,
        "base_kva": 1000.0,
        "buses": [{"id": "s", "phases": "a"}, {"id": "1", "phases": "a", "der": {"site_cap_kw": 200.0}}],
        "lines": [{"from": "s", "to": "1", "phases": "a", "length_ft": 100.0, "z_ohm": z}],
        "timeseries": {"steps": 1, "loads": "loads.csv", "power_factor": 1.0, "lmp": "lmp.csv", "production": "prod.csv"},
        "economics": {
            "planner": {"r_e": 0.03, "r_c": 0.03, "wacc": 0.10, "years": 20, "c_bkw": 300.0, "c_bkwh": 250.0, "eta": 0.96, "c_dem": 50.0, "c_trf": 150000.0},
            "investor": {"r_e": 0.03, "r_c": 0.03, "ror": 0.15, "c_kw": 1600.0, "c_om": 17.0, "c_imp": 0.15}
        }
    });
    fs::write(dir.join("loads.csv"), "bus,phase,t0\n1,a,100\n").unwrap();
    fs::write(dir.join("lmp.csv"), "bus,phase,t0\ns,a,0.05\n").unwrap();
    fs::write(dir.join("prod.csv"), "bus,phase,t0\n1,a,0.5\n").unwrap();
    let path = dir.join("case.json");
    fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    path
}

fn two_bus_v1() -> Result<f64, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let case: Case = load_case(&two_bus_case(dir.path())).map_err(|e| e.to_string())?;
    let mut m = Model::new();
    let inj = Injections::from_loads(&case);
    let flows = build_lindistflow(&mut m, &case, &inj).map_err(|e| e.to_string())?;
    m.set_objective(LinExpr::new()).map_err(|e| e.to_string())?;
    let sol = solve_lp(&m).map_err(|e| e.to_string())?;
    if sol.status != Status::Optimal {
        return Err(format!("flow LP {:?}", sol.status));
    }
    Ok(sol.primal[flows.v[1][0][0].0])
}

fn flow_line(b: &Bundled) -> Line {
    let v1 = two_bus_v1();
    let mut pass = matches!(v1, Ok(v) if (v - 0.998).abs() <= FLOW_TOL);
    let mut worst: f64 = 0.0;
    if b.error.is_some() || b.reports.is_empty() {
        pass = false;
    }
    for r in &b.reports {
        match &r.verification.balance {
            Some(c) => {
                worst = worst.max(c.max_balance).max(c.max_voltage);
                pass &= c.pass && c.max_balance <= BALANCE_TOL && c.max_voltage <= BALANCE_TOL;
            }
            None => pass = false,
        }
    }
    let v1 = match v1 {
        Ok(v) => format!("{v:.12}"),
        Err(e) => e,
    };
    line(
        10,
        pass,
        format!(
            "two-bus v1 = {v1} (target 0.998, tol {FLOW_TOL:e}), worst balance residual {worst:.2e} over {} scenarios (tol {BALANCE_TOL:e})",
            b.reports.len()
        ),
    )
}

struct DenseLp {
    c: Vec<f64>,
    rows: Vec<(Vec<f64>, Sense, f64)>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

fn random_lp(rng: &mut StdRng) -> DenseLp {
    let n = rng.gen_range(2..=5);
    let m = rng.gen_range(1..=4);
    let c = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
    let lb: Vec<f64> = (0..n).map(|_| rng.gen_range(-3i32..=0) as f64).collect();
    let ub = lb.iter().map(|l| l + rng.gen_range(1i32..=6) as f64).collect();
    let rows = (0..m)
        .map(|_| {
            let a = (0..n).map(|_| rng.gen_range(-4i32..=4) as f64).collect();
            let sense = match rng.gen_range(0..5) {
                0 => Sense::Eq,
                1 | 2 => Sense::Ge,
                _ => Sense::Le,
            };
            (a, sense, rng.gen_range(-6i32..=6) as f64)
        })
        .collect();
    DenseLp { c, rows, lb, ub }
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Best objective over all vertices of the box-bounded feasible region.
fn vertex_minimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.c.len();
    let mut planes: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lb[j]));
        planes.push((e, lp.ub[j]));
    }
    let feasible = |x: &[f64]| {
        (0..n).all(|j| x[j] >= lp.lb[j] - 1e-7 && x[j] <= lp.ub[j] + 1e-7)
            && lp.rows.iter().all(|(a, s, b)| {
                let v: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                match s {
                    Sense::Le => v <= b + 1e-7,
                    Sense::Ge => v >= b - 1e-7,
                    Sense::Eq => (v - b).abs() <= 1e-7,
                }
            })
    };
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << planes.len()) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let chosen: Vec<usize> = (0..planes.len()).filter(|i| mask & (1 << i) != 0).collect();
        let a = chosen.iter().map(|&i| planes[i].0.clone()).collect();
        let b = chosen.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(&x) {
                let obj: f64 = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    }
    best
}

fn dense_model(lp: &DenseLp) -> Model {
    let mut m = Model::new();
    let xs: Vec<VarId> = (0..lp.c.len()).map(|j| m.continuous(&format!("x{j}"), lp.lb[j], lp.ub[j]).unwrap()).collect();
    for (i, (a, s, b)) in lp.rows.iter().enumerate() {
        let e = LinExpr::from_terms(xs.iter().zip(a).map(|(&x, &a)| (x, a)).collect::<Vec<_>>());
        m.add_constraint(e, *s, *b, &format!("r{i}")).unwrap();
    }
    m.set_objective(LinExpr::from_terms(xs.iter().zip(&lp.c).map(|(&x, &c)| (x, c)).collect::<Vec<_>>())).unwrap();
    m
}

/// Number of random LPs whose simplex answer disagrees with the vertex oracle.
fn lp_mismatches(count: usize) -> usize {
    let mut rng = StdRng::seed_from_u64(20);
    let mut bad = 0;
    for _ in 0..count {
        let lp = random_lp(&mut rng);
        let std = standard_form(&dense_model(&lp)).unwrap();
        let ok = match (simplex(&std), vertex_minimum(&lp)) {
            (Ok(r), None) => r.status == Status::Infeasible,
            (Ok(r), Some(best)) => r.status == Status::Optimal && (r.objective - best).abs() <= LP_TOL * (1.0 + best.abs()),
            (Err(_), _) => false,
        };
        bad += usize::from(!ok);
    }
    bad
}

fn random_milp(rng: &mut StdRng) -> (Model, Vec<VarId>, Vec<VarId>) {
    let mut m = Model::new();
    let z: Vec<VarId> = (0..3).map(|i| m.binary(&format!("z{i}")).unwrap()).collect();
    let x: Vec<VarId> = (0..2).map(|i| m.continuous(&format!("x{i}"), 0.0, 10.0).unwrap()).collect();
    let all: Vec<VarId> = z.iter().chain(&x).copied().collect();
    for r in 0..3 {
        let terms: Vec<(VarId, f64)> = all.iter().map(|&v| (v, rng.gen_range(-5i32..=5) as f64)).collect();
        m.add_constraint(LinExpr::from_terms(terms), Sense::Le, rng.gen_range(0i32..=8) as f64, &format!("r{r}")).unwrap();
    }
    for (i, &xi) in x.iter().enumerate() {
        m.add_constraint(LinExpr::from(xi) - LinExpr::term(z[i], 10.0), Sense::Le, 0.0, &format!("link{i}")).unwrap();
    }
    let obj: Vec<(VarId, f64)> = all.iter().map(|&v| (v, rng.gen_range(-6i32..=6) as f64)).collect();
    m.set_objective(LinExpr::from_terms(obj)).unwrap();
    (m, z, x)
}

/// Minimum over the 8 binary assignments, each solved as an LP in the
/// continuous variables.
fn binary_enumeration(m: &Model, z: &[VarId], x: &[VarId]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << z.len()) {
        let val = |v: VarId| z.iter().position(|&zi| zi == v).map(|i| f64::from((mask >> i) & 1));
        let mut lp = Model::new();
        let ids: Vec<VarId> = x.iter().map(|&v| lp.continuous(&m.variables()[v.index()].name, 0.0, 10.0).unwrap()).collect();
        let split = |e: &LinExpr| {
            let mut constant = 0.0;
            let mut terms = Vec::new();
            for &(v, a) in e.terms() {
                match val(v) {
                    Some(b) => constant += a * b,
                    None => terms.push((ids[x.iter().position(|&xi| xi == v).unwrap()], a)),
                }
            }
            (LinExpr::from_terms(terms), constant)
        };
        for c in m.constraints() {
            let (e, k) = split(&c.expr);
            lp.add_constraint(e, c.sense, c.rhs - k, &c.name).unwrap();
        }
        let (obj, k) = split(m.objective());
        let k = k + m.objective().constant_term();
        lp.set_objective(obj).unwrap();
        let sol = solve_lp(&lp).unwrap();
        if sol.status == Status::Optimal {
            let v = sol.objective + k;
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn milp_mismatches(count: usize) -> usize {
    let mut rng = StdRng::seed_from_u64(21);
    let mut bad = 0;
    for _ in 0..count {
        let (m, z, x) = random_milp(&mut rng);
        let ok = match (solve_milp(&m, &BnbOptions::default()), binary_enumeration(&m, &z, &x)) {
            (Ok((s, _)), None) => s.status == Status::Infeasible,
            (Ok((s, _)), Some(best)) => s.status == Status::Optimal && (s.objective - best).abs() <= 1e-9 * (1.0 + best.abs()),
            (Err(_), _) => false,
        };
        bad += usize::from(!ok);
    }
    bad
}

fn backend_agreement() -> Result<(f64, f64), String> {
    let case = load_case(&data("toy2.json")).map_err(|e| e.to_string())?;
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tools/highs_solve.py");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let internal = SolverConfig { gap: 1e-9, ..Default::default() };
    let external = SolverConfig {
        backend: Backend::External {
            command: format!("python3 {}", script.display()),
            workdir: dir.path().to_path_buf(),
        },
        ..internal.clone()
    };
    let a = solve_scenario(&case, ScenarioKind::BessDer, &internal, None).map_err(|e| e.to_string())?;
    let b = solve_scenario(&case, ScenarioKind::BessDer, &external, None).map_err(|e| format!("external backend: {e}"))?;
    if b.solution.status != Status::Optimal {
        return Err(format!("external backend status {:?}", b.solution.status));
    }
    Ok((a.solution.objective, b.solution.objective))
}

fn solver_line() -> Line {
    let lps = 20;
    let milps = 20;
    let lp_bad = lp_mismatches(lps);
    let milp_bad = milp_mismatches(milps);
    let (backend_ok, backend) = match backend_agreement() {
        Ok((a, b)) => {
            let gap = (a - b).abs() / a.abs().max(1.0);
            (gap <= BACKEND_TOL, format!("internal {a:.4} vs external {b:.4}, gap {gap:.2e} (tol {BACKEND_TOL:e})"))
        }
        Err(e) => (false, format!("external backend unavailable: {e}")),
    };
    line(
        11,
        lp_bad == 0 && milp_bad == 0 && backend_ok,
        format!(
            "{lp_bad}/{lps} LPs off the vertex oracle (tol {LP_TOL:e}), {milp_bad}/{milps} 3-binary MILPs off enumeration, {backend}"
        ),
    )
}

fn main() -> ExitCode {
    let mut lines = vec![toy_oracle(), pwf_line(), solver_line()];
    eprintln!("solving the bundled case at its full horizon");
    let bundled = run_bundled();
    lines.extend(scenario_lines(&bundled));
    lines.push(flow_line(&bundled));
    lines.sort_by_key(|l| l.number);
    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2}: {} {}", l.number, if l.pass { "PASS" } else { "FAIL" }, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria pass", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
