#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

pub fn core_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

pub fn toy_path() -> PathBuf {
    core_data("toy2.json")
}

pub fn bundled_path() -> PathBuf {
    core_data("ieee13_synth.json")
}

/// Copy of the two-bus toy case with its own loads, and optionally without
/// the line upgrade.
pub struct ToyCase {
    pub dir: TempDir,
    pub path: PathBuf,
}

pub fn toy_variant(loads: [f64; 2], upgradable: bool) -> ToyCase {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_slice(&fs::read(toy_path()).unwrap()).unwrap();
    if !upgradable {
        doc["lines"][0].as_object_mut().unwrap().remove("upgrade");
    }
    doc["timeseries"]["loads"] = "loads.csv".into();
    doc["timeseries"]["lmp"] = "lmp.csv".into();
    doc["timeseries"]["production"] = "production.csv".into();
    let d = dir.path();
    fs::write(d.join("loads.csv"), format!("bus,phase,t0,t1\n1,a,{},{}\n", loads[0], loads[1])).unwrap();
    fs::write(d.join("lmp.csv"), "bus,phase,t0,t1\ns,a,0.05,0.05\n").unwrap();
    fs::write(d.join("production.csv"), "bus,phase,t0,t1\n1,a,0.3,0.9\n").unwrap();
    let path = d.join("case.json");
    fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    ToyCase { dir, path }
}
