//! Regenerates the bundled synthetic IEEE-13 case.
//!
//! ```text
//! cargo run -p nwa-core --example gen_ieee13 -- crates/core/data
//! ```
//!
//! Seven representative days of hourly data. Ratings are set from the
//! generated loads so the flagged transformers and line groups sit at fixed
//! overload percentages.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const DAYS: usize = 7;
const STEPS: usize = DAYS * 24;
const LOAD_SCALE: f64 = 0.3;
const FT_PER_MILE: f64 = 5280.0;

#[derive(Clone, Copy)]
enum Shape {
    Commercial,
    Residential,
    Mixed,
}

fn shape(kind: Shape, day: usize, hour: f64) -> f64 {
    let weekend = day >= 5;
    let c = {
        let v = 0.3 + 0.7 * (-((hour - 13.5) / 3.5).powi(2)).exp();
        if weekend {
            0.75 * v
        } else {
            v
        }
    };
    let r = 0.35 + 0.25 * (-((hour - 8.0) / 2.0).powi(2)).exp() + 0.65 * (-((hour - 19.0) / 2.5).powi(2)).exp();
    match kind {
        Shape::Commercial => c,
        Shape::Residential => r,
        Shape::Mixed => 0.6 * c + 0.4 * r,
    }
}

/// Phase impedance matrices of the feeder's line configurations, ohm/mile,
/// listed for phases a, b, c (zeros for absent phases).
fn config(name: &str) -> [[(f64, f64); 3]; 3] {
    let z = (0.0, 0.0);
    match name {
        "601" => [
            [(0.3465, 1.0179), (0.1560, 0.5017), (0.1580, 0.4236)],
            [(0.1560, 0.5017), (0.3375, 1.0478), (0.1535, 0.3849)],
            [(0.1580, 0.4236), (0.1535, 0.3849), (0.3414, 1.0348)],
        ],
        "602" => [
            [(0.7526, 1.1814), (0.1580, 0.4236), (0.1560, 0.5017)],
            [(0.1580, 0.4236), (0.7475, 1.1983), (0.1535, 0.3849)],
            [(0.1560, 0.5017), (0.1535, 0.3849), (0.7436, 1.2112)],
        ],
        "603" => [[z, z, z], [z, (1.3294, 1.3471), (0.2066, 0.4591)], [z, (0.2066, 0.4591), (1.3238, 1.3569)]],
        "604" => [[(1.3238, 1.3569), z, (0.2066, 0.4591)], [z, z, z], [(0.2066, 0.4591), z, (1.3294, 1.3471)]],
        "605" => [[z, z, z], [z, z, z], [z, z, (1.3292, 1.3475)]],
        "606" => [
            [(0.7982, 0.4463), (0.3192, 0.0328), (0.2849, -0.0143)],
            [(0.3192, 0.0328), (0.7891, 0.4041), (0.3192, 0.0328)],
            [(0.2849, -0.0143), (0.3192, 0.0328), (0.7982, 0.4463)],
        ],
        "607" => [[(1.3425, 0.5124), z, z], [z, z, z], [z, z, z]],
        _ => panic!("unknown configuration {name}"),
    }
}

fn impedance(cfg: &str, length_ft: f64) -> Value {
    let m = config(cfg);
    let k = length_ft / FT_PER_MILE;
    let re: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|e| round(e.0 * k, 8)).collect()).collect();
    let im: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|e| round(e.1 * k, 8)).collect()).collect();
    json!({ "re": re, "im": im })
}

fn diagonal(r: f64, x: f64) -> Value {
    let d = |v: f64| vec![vec![v, 0.0, 0.0], vec![0.0, v, 0.0], vec![0.0, 0.0, v]];
    json!({ "re": d(r), "im": d(x) })
}

fn round(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

fn series_header() -> String {
    let mut h = String::from("bus,phase");
    for t in 0..STEPS {
        let _ = write!(h, ",t{t}");
    }
    h.push('\n');
    h
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("crates/core/data"));
    let dir = out.join("ieee13_synth");
    fs::create_dir_all(&dir).expect("create output directory");
    let mut rng = ChaCha8Rng::seed_from_u64(13);

    // (bus, phases, kW per phase a/b/c, shape)
    let loads: [(&str, &str, [f64; 3], Shape); 8] = [
        ("634", "abc", [160.0, 120.0, 120.0], Shape::Commercial),
        ("645", "bc", [0.0, 170.0, 0.0], Shape::Commercial),
        ("646", "bc", [0.0, 115.0, 115.0], Shape::Commercial),
        ("652", "a", [128.0, 0.0, 0.0], Shape::Residential),
        ("671", "abc", [402.0, 451.0, 502.0], Shape::Mixed),
        ("675", "abc", [485.0, 68.0, 290.0], Shape::Residential),
        ("692", "abc", [0.0, 0.0, 170.0], Shape::Commercial),
        ("611", "c", [0.0, 0.0, 170.0], Shape::Residential),
    ];
    let bus_phases: [(&str, &str); 13] = [
        ("650", "abc"),
        ("632", "abc"),
        ("633", "abc"),
        ("634", "abc"),
        ("645", "bc"),
        ("646", "bc"),
        ("671", "abc"),
        ("680", "abc"),
        ("684", "ac"),
        ("611", "c"),
        ("652", "a"),
        ("692", "abc"),
        ("675", "abc"),
    ];

    // per-bus, per-phase hourly kW
    let mut series: Vec<(String, usize, Vec<f64>)> = Vec::new();
    let mut loads_csv = series_header();
    for (bus, _, kw, kind) in loads {
        for p in 0..3 {
            if kw[p] == 0.0 {
                continue;
            }
            let mut v = Vec::with_capacity(STEPS);
            for t in 0..STEPS {
                let (day, hour) = (t / 24, (t % 24) as f64);
                let noise = 1.0 + 0.03 * (rng.gen::<f64>() * 2.0 - 1.0);
                v.push(round(LOAD_SCALE * kw[p] * shape(kind, day, hour) * noise, 3));
            }
            let _ = write!(loads_csv, "{bus},{}", ['a', 'b', 'c'][p]);
            for x in &v {
                let _ = write!(loads_csv, ",{x}");
            }
            loads_csv.push('\n');
            series.push((bus.to_string(), p, v));
        }
    }
    let phase_load = |buses: &[&str], p: usize, t: usize| -> f64 {
        series.iter().filter(|(b, q, _)| *q == p && buses.contains(&b.as_str())).map(|s| s.2[t]).sum()
    };
    let peak = |buses: &[&str]| -> f64 {
        let mut m: f64 = 0.0;
        for p in 0..3 {
            for t in 0..STEPS {
                m = m.max(phase_load(buses, p, t));
            }
        }
        m
    };

    // production factor: clear-sky arc scaled by a daily clearness index
    let mut prod_csv = series_header();
    let clearness: Vec<f64> = (0..DAYS).map(|_| 0.75 + 0.25 * rng.gen::<f64>()).collect();
    let prod: Vec<f64> = (0..STEPS)
        .map(|t| {
            let (day, hour) = (t / 24, (t % 24) as f64 + 0.5);
            let arc = (std::f64::consts::PI * (hour - 6.0) / 13.0).sin().max(0.0);
            round(0.85 * clearness[day] * arc, 4)
        })
        .collect();
    for bus in ["634", "646", "675"] {
        let _ = write!(prod_csv, "{bus},abc");
        for f in &prod {
            let _ = write!(prod_csv, ",{f}");
        }
        prod_csv.push('\n');
    }

    // LMP: sinusoid plus noise around 0.04 $/kWh
    let mut lmp_csv = series_header();
    let _ = write!(lmp_csv, "650,abc");
    for t in 0..STEPS {
        let hour = (t % 24) as f64;
        let v = 0.04 + 0.012 * (2.0 * std::f64::consts::PI * (hour - 11.0) / 24.0).sin() + 0.003 * (rng.gen::<f64>() * 2.0 - 1.0);
        let _ = write!(lmp_csv, ",{}", round(v.max(0.005), 5));
    }
    lmp_csv.push('\n');

    // ratings from the generated loads
    let trf = |bus: &str, pct: f64| {
        let r = round(peak(&[bus]) * 100.0 / pct, 3);
        json!({ "rating_kw": r, "upgrade_kw": round(r, 3) })
    };
    let rated = |buses: &[&str], pct: f64| round(peak(buses) * 100.0 / pct, 3);
    let d633 = ["633", "634"];
    let d645 = ["645", "646"];
    let d684 = ["684", "611", "652"];
    let d671 = ["671", "680", "684", "611", "652", "692", "675"];
    let all: Vec<&str> = bus_phases.iter().map(|b| b.0).collect();

    let line = |from: &str, to: &str, phases: &str, ft: f64, z: Value, rating: Option<f64>, group: Option<&str>| {
        let mut l = json!({ "from": from, "to": to, "phases": phases, "length_ft": ft, "z_ohm": z });
        if let Some(r) = rating {
            l["rating_kw"] = json!(r);
            if let Some(g) = group {
                l["upgrade"] = json!({ "delta_kw": round(0.5 * r, 3), "group": g });
            }
        }
        l
    };
    let lines = vec![
        line("650", "632", "abc", 2000.0, impedance("601", 2000.0), Some(rated(&all, 80.0)), None),
        line("632", "633", "abc", 500.0, impedance("602", 500.0), Some(rated(&d633, 110.0)), Some("632-633")),
        // the 633-634 transformer's series impedance, referred to 4.16 kV
        line("633", "634", "abc", 0.0, diagonal(0.3807, 0.6922), None, None),
        line("632", "645", "bc", 500.0, impedance("603", 500.0), Some(rated(&d645, 110.0)), Some("632-645-646")),
        line("645", "646", "bc", 300.0, impedance("603", 300.0), Some(rated(&["646"], 110.0)), Some("632-645-646")),
        line("632", "671", "abc", 2000.0, impedance("601", 2000.0), Some(rated(&d671, 80.0)), None),
        line("671", "680", "abc", 1000.0, impedance("601", 1000.0), None, None),
        line("671", "684", "ac", 300.0, impedance("604", 300.0), Some(rated(&d684, 110.0)), Some("671-684")),
        line("684", "611", "c", 300.0, impedance("605", 300.0), None, None),
        line("684", "652", "a", 800.0, impedance("607", 800.0), None, None),
        // closed switch
        line("671", "692", "abc", 0.0, diagonal(0.0001, 0.0001), None, None),
        line("692", "675", "abc", 500.0, impedance("606", 500.0), Some(rated(&["675"], 110.0)), Some("692-675")),
    ];

    let mut buses = Vec::new();
    for (id, ph) in bus_phases {
        let mut b = json!({ "id": id, "phases": ph });
        match id {
            "634" => {
                b["der"] = json!({});
                b["bess"] = json!(true);
                b["transformer"] = trf("634", 143.0);
            }
            "646" => {
                b["der"] = json!({});
                b["transformer"] = trf("646", 111.0);
            }
            "675" => {
                b["der"] = json!({});
                b["transformer"] = trf("675", 167.0);
            }
            "632" => b["bess"] = json!(true),
            _ => {}
        }
        buses.push(b);
    }

    let map: Vec<usize> = (0..STEPS).map(|t| t / 24).collect();
    let case = json!({
        "name": "ieee13_synth",
        "substation": "650",
        "base_kv": round(4.16 / 3f64.sqrt(), 6),
        "base_kva": round(5000.0 / 3.0, 6),
        "voltage_bounds": [0.91, 1.1],
        "buses": buses,
        "lines": lines,
        "timeseries": {
            "steps": STEPS,
            "step_hours": 1.0,
            "loads": "ieee13_synth/loads_kw.csv",
            "power_factor": 0.95,
            "lmp": "ieee13_synth/lmp.csv",
            "production": "ieee13_synth/production.csv",
            "demand_periods": { "map": map, "weights": vec![12.0 / DAYS as f64; DAYS] }
        },
        "economics": {
            "planner": { "r_e": 0.03, "r_c": 0.03, "wacc": 0.10, "years": 20,
                         "c_bkw": 300.0, "c_bkwh": 250.0, "eta": 0.96, "c_dem": 50.0, "c_trf": 150000.0 },
            "investor": { "r_e": 0.03, "r_c": 0.03, "ror": 0.15,
                          "c_kw": 1600.0, "c_om": 17.0, "c_imp": 0.15 }
        }
    });
    fs::write(out.join("ieee13_synth.json"), serde_json::to_string_pretty(&case).unwrap() + "\n").unwrap();
    fs::write(dir.join("loads_kw.csv"), loads_csv).unwrap();
    fs::write(dir.join("production.csv"), prod_csv).unwrap();
    fs::write(dir.join("lmp.csv"), lmp_csv).unwrap();
    println!("wrote {}", out.join("ieee13_synth.json").display());
}
