mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{bundled_path, toy_path, toy_variant};
use nwa_cli::report::ScenarioReport;
use serde_json::Value;

fn nwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nwa")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run(case: &Path, scenario: &str, out: &Path) -> Output {
    nwa(&["run", "--case", case.to_str().unwrap(), "--scenario", scenario, "--out", out.to_str().unwrap(), "--gap", "1e-9"])
}

#[test]
fn run_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("der.json");
    let o = run(&toy_path(), "bess-der", &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("bess-der"));
    let r = ScenarioReport::read(&out).unwrap();
    assert_eq!(r.scenario, "bess-der");
    let v = nwa(&["validate-kkt", out.to_str().unwrap()]);
    assert_eq!(code(&v), 0);
    assert!(stdout(&v).contains("complementarity"));
}

#[test]
fn tampered_duals_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("der.json");
    assert_eq!(code(&run(&toy_path(), "bess-der", &out)), 0);
    let mut doc: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let lam = doc["lower_level"]["lambda"][0].as_f64().unwrap();
    doc["lower_level"]["lambda"][0] = (lam + 0.5).into();
    std::fs::write(&out, serde_json::to_vec(&doc).unwrap()).unwrap();
    let v = nwa(&["validate-kkt", out.to_str().unwrap()]);
    assert_eq!(code(&v), 4);
    assert!(stdout(&v).contains("FAIL"));
}

#[test]
fn all_scenarios_with_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = nwa(&["run", "--case", toy_path().to_str().unwrap(), "--scenario", "all", "--parallel", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["baseline.json", "bess.json", "bess-der.json", "comparison.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let table = dir.path().join("table.csv");
    let files: Vec<String> =
        ["baseline", "bess", "bess-der"].iter().map(|s| dir.path().join(format!("{s}.json")).display().to_string()).collect();
    let c = nwa(&["compare", &files[0], &files[1], &files[2], "--out", table.to_str().unwrap()]);
    assert_eq!(code(&c), 0);
    assert!(stdout(&c).contains("Total LCC"));
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("scenario,total_lcc,npv"));
    assert_eq!(csv.lines().count(), 4);

    let cf = nwa(&["cashflow", &files[2]]);
    assert_eq!(code(&cf), 0);
    assert_eq!(stdout(&cf).lines().count(), 22);
    let p = nwa(&["export", &files[0], "--what", "price-signal-csv"]);
    assert_eq!(stdout(&p), "bus,t,price_usd_per_kwh\n1,0,0.0\n1,1,0.0\n");
    let lp = dir.path().join("m.lp");
    let e = nwa(&["export", &files[2], "--what", "lp-file", "--out", lp.to_str().unwrap()]);
    assert_eq!(code(&e), 0);
    assert!(nwa_lp::parse_model_file(&std::fs::read_to_string(&lp).unwrap()).is_ok());
    assert_eq!(code(&nwa(&["export", &files[2], "--what", "pdf"])), 1);
}

#[test]
fn reports_of_different_cases_do_not_compare() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let other = toy_variant([55.0, 10.0], true);
    assert_eq!(code(&run(&toy_path(), "bess", &a)), 0);
    assert_eq!(code(&run(&other.path, "bess", &b)), 0);
    let c = nwa(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&c), 1);
    assert!(String::from_utf8_lossy(&c.stderr).contains("different cases"));
}

#[test]
fn inspect_flags_overloads() {
    let o = nwa(&["inspect", "--case", bundled_path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.ends_with("overloaded")).count(), 8);
    assert!(text.contains("trf 675"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let fixed = toy_variant([60.0, 10.0], false);
    assert_eq!(code(&run(&fixed.path, "baseline", &out)), 2);
    assert_eq!(code(&run(&fixed.path, "bess", &out)), 2);
    assert!(!out.exists());
    let o = nwa(&[
        "run", "--case", bundled_path().to_str().unwrap(), "--scenario", "bess-der", "--horizon", "24",
        "--time-limit", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(Path::new("/nonexistent/case.json"), "bess", &out)), 1);
    assert_eq!(code(&run(&toy_path(), "nothing", &out)), 1);
    assert_eq!(code(&nwa(&["run", "--case", toy_path().to_str().unwrap(), "--scenario", "bess", "--out", "x", "--solver", "magic"])), 1);
}
