#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nwa_core::{load_case, Case};
use serde_json::{json, Value};
use tempfile::TempDir;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn bundled() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| load_case(&data("ieee13_synth.json")).unwrap())
}

pub fn bundled_day() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| bundled().with_horizon(24).unwrap())
}

pub fn toy() -> Case {
    load_case(&data("toy2.json")).unwrap()
}

/// Writes a case document and its series files into a fresh directory.
pub struct CaseDir {
    pub dir: TempDir,
    pub path: PathBuf,
}

pub fn write_case(doc: &Value, files: &[(&str, String)]) -> CaseDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in files {
        fs::write(dir.path().join(name), body).unwrap();
    }
    let path = dir.path().join("case.json");
    fs::write(&path, serde_json::to_vec_pretty(doc).unwrap()).unwrap();
    CaseDir { dir, path }
}

pub fn series_csv(rows: &[(&str, &str, Vec<f64>)]) -> String {
    let steps = rows.first().map_or(0, |r| r.2.len());
    let mut s = String::from("bus,phase");
    for t in 0..steps {
        s.push_str(&format!(",t{t}"));
    }
    s.push('\n');
    for (bus, phase, vals) in rows {
        s.push_str(&format!("{bus},{phase}"));
        for v in vals {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

pub fn z_single(r: f64, x: f64) -> Value {
    json!({"re": [[r, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], "im": [[x, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]})
}

pub fn economics() -> Value {
    json!({
        "planner": {"r_e": 0.03, "r_c": 0.03, "wacc": 0.10, "years": 20, "c_bkw": 300.0, "c_bkwh": 250.0, "eta": 0.96, "c_dem": 50.0, "c_trf": 150000.0},
        "investor": {"r_e": 0.03, "r_c": 0.03, "ror": 0.15, "c_kw": 1600.0, "c_om": 17.0, "c_imp": 0.15}
    })
}

/// Single-phase chain `s − 1 − … − n` with one load per bus, no reactive
/// load, 1 kV and 1000 kVA bases (so ohms are per unit).
pub fn chain(loads: &[Vec<f64>], r: f64, x: f64, der_at: Option<usize>, production: Option<Vec<f64>>) -> CaseDir {
    let steps = loads[0].len();
    let mut buses = vec![json!({"id": "s", "phases": "a"})];
    let mut lines = Vec::new();
    let mut prev = "s".to_string();
    let mut load_rows = Vec::new();
    for (i, l) in loads.iter().enumerate() {
        let id = format!("{}", i + 1);
        let mut b = json!({"id": id, "phases": "a"});
        if der_at == Some(i + 1) {
            b["der"] = json!({"site_cap_kw": 200.0});
        }
        buses.push(b);
        lines.push(json!({"from": prev, "to": id, "phases": "a", "length_ft": 100.0, "z_ohm": z_single(r, x)}));
        load_rows.push((id.clone(), l.clone()));
        prev = id;
    }
    let der_bus = der_at.map_or("1".to_string(), |d| d.to_string());
    let prod = production.unwrap_or_else(|| vec![0.5; steps]);
    let doc = json!({
        "name": "chain",
        "substation": "s",
        "base_kv": 1.0,
        "base_kva": 1000.0,
        "buses": buses,
        "lines": lines,
        "timeseries": {
            "steps": steps,
            "loads": "loads.csv",
            "power_factor": 1.0,
            "lmp": "lmp.csv",
            "production": "prod.csv"
        },
        "economics": economics()
    });
    let rows: Vec<(&str, &str, Vec<f64>)> = load_rows.iter().map(|(id, l)| (id.as_str(), "a", l.clone())).collect();
    write_case(
        &doc,
        &[
            ("loads.csv", series_csv(&rows)),
            ("lmp.csv", series_csv(&[("s", "a", vec![0.05; steps])])),
            ("prod.csv", series_csv(&[(der_bus.as_str(), "a", prod)])),
        ],
    )
}
