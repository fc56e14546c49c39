//! Feeder data model and case ingestion.
//!
//! A case is one JSON document plus CSV time series (`bus,phase,t0,t1,…`)
//! whose paths are relative to the JSON file. Loading resolves every default
//! and records it in the case's provenance log.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PHASE_NAMES: [char; 3] = ['a', 'b', 'c'];
pub const HOURS_PER_YEAR: f64 = 8760.0;
const DEFAULT_V_MIN: f64 = 0.91;
const DEFAULT_V_MAX: f64 = 1.1;
const DEFAULT_POWER_FACTOR: f64 = 0.95;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("network is not radial: cycle closed by line(s) {0:?}")]
    NonRadial(Vec<String>),
    #[error("network is disconnected: bus(es) {0:?} not reachable from the substation")]
    Disconnected(Vec<String>),
    #[error("{file}: series for {row} has {found} steps, expected {expected}")]
    LengthMismatch {
        file: String,
        row: String,
        expected: usize,
        found: usize,
    },
    #[error("{file}: {msg}")]
    Csv { file: String, msg: String },
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub name: String,
    pub substation: String,
    /// Line-to-neutral base voltage, kV.
    pub base_kv: f64,
    /// Per-phase base power, kVA.
    pub base_kva: f64,
    #[serde(default)]
    pub voltage_bounds: Option<[f64; 2]>,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    pub timeseries: SeriesSpec,
    pub economics: EconomicsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: String,
    pub phases: String,
    #[serde(default)]
    pub der: Option<DerSpec>,
    #[serde(default)]
    pub bess: bool,
    #[serde(default)]
    pub transformer: Option<TransformerSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerSpec {
    #[serde(default)]
    pub site_cap_kw: Option<f64>,
    #[serde(default)]
    pub c_kw: Option<f64>,
    #[serde(default)]
    pub c_imp: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerSpec {
    pub rating_kw: f64,
    pub upgrade_kw: f64,
    #[serde(default)]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    pub phases: String,
    pub length_ft: f64,
    pub z_ohm: ImpedanceSpec,
    #[serde(default)]
    pub rating_kw: Option<f64>,
    #[serde(default)]
    pub upgrade: Option<LineUpgradeSpec>,
}

/// Real and imaginary parts of the 3×3 phase impedance matrix, ohm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSpec {
    pub re: [[f64; 3]; 3],
    pub im: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineUpgradeSpec {
    pub delta_kw: f64,
    #[serde(default)]
    pub cost: Option<f64>,
    /// Lines sharing a group share one upgrade decision.
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub steps: usize,
    #[serde(default = "one")]
    pub step_hours: f64,
    /// How many times the modeled horizon repeats in a year.
    #[serde(default)]
    pub annual_scale: Option<f64>,
    pub loads: String,
    #[serde(default)]
    pub reactive: Option<String>,
    #[serde(default)]
    pub power_factor: Option<f64>,
    pub lmp: String,
    pub production: String,
    #[serde(default)]
    pub demand_periods: Option<DemandPeriodSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandPeriodSpec {
    pub map: Vec<usize>,
    #[serde(default)]
    pub prices: Option<Vec<f64>>,
    /// Billing months represented by each period.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicsSpec {
    pub planner: PlannerSpec,
    pub investor: InvestorSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    pub r_e: f64,
    pub r_c: f64,
    pub wacc: f64,
    pub years: u32,
    pub c_bkw: f64,
    pub c_bkwh: f64,
    pub eta: f64,
    /// Demand charge, $/kW per billing month.
    pub c_dem: f64,
    pub c_trf: f64,
    #[serde(default)]
    pub price_cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorSpec {
    pub r_e: f64,
    pub r_c: f64,
    pub ror: f64,
    pub c_kw: f64,
    pub c_om: f64,
    pub c_imp: f64,
}

// ---------------------------------------------------------------------------
// Resolved case

#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    pub rating_kw: f64,
    pub upgrade_kw: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerSite {
    pub site_cap_kw: f64,
    pub c_kw: f64,
    pub c_imp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: [bool; 3],
    pub der: Option<DerSite>,
    pub bess: bool,
    pub transformer: Option<Transformer>,
}

impl Bus {
    pub fn phase_list(&self) -> Vec<usize> {
        (0..3).filter(|&p| self.phases[p]).collect()
    }

    pub fn num_phases(&self) -> usize {
        self.phases.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    /// Upstream end once the feeder is oriented.
    pub from: usize,
    pub to: usize,
    pub phases: [bool; 3],
    pub length_ft: f64,
    pub z_ohm: [[Complex64; 3]; 3],
    pub rating_kw: Option<f64>,
    pub upgrade: Option<LineUpgrade>,
}

impl Line {
    pub fn phase_list(&self) -> Vec<usize> {
        (0..3).filter(|&p| self.phases[p]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineUpgrade {
    pub delta_kw: f64,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineGroup {
    pub name: String,
    pub lines: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub substation: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub base_kv: f64,
    pub base_kva: f64,
    pub line_groups: Vec<LineGroup>,
    /// Line feeding each bus (`None` at the substation).
    pub parent_line: Vec<Option<usize>>,
    /// Buses in breadth-first order from the substation.
    pub order: Vec<usize>,
}

impl Feeder {
    /// Orients a radial feeder away from the substation and fills the
    /// traversal tables. Fails on cycles or unreachable buses.
    pub fn new(
        buses: Vec<Bus>,
        mut lines: Vec<Line>,
        substation: usize,
        v_bounds: (f64, f64),
        base_kv: f64,
        base_kva: f64,
        line_groups: Vec<LineGroup>,
    ) -> Result<Feeder, CaseError> {
        let names: Vec<String> = buses.iter().map(|b| b.id.clone()).collect();
        let edges: Vec<(usize, usize)> = lines.iter().map(|l| (l.from, l.to)).collect();
        validate_radial(&names, &edges, substation)?;

        let mut adj = vec![Vec::new(); buses.len()];
        for (k, &(a, b)) in edges.iter().enumerate() {
            adj[a].push(k);
            adj[b].push(k);
        }
        let mut parent_line = vec![None; buses.len()];
        let mut seen = vec![false; buses.len()];
        let mut order = Vec::with_capacity(buses.len());
        let mut queue = VecDeque::from([substation]);
        seen[substation] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &k in &adj[i] {
                let (a, b) = edges[k];
                let j = if a == i { b } else { a };
                if seen[j] {
                    continue;
                }
                seen[j] = true;
                parent_line[j] = Some(k);
                let line = &mut lines[k];
                if line.from != i {
                    std::mem::swap(&mut line.from, &mut line.to);
                }
                queue.push_back(j);
            }
        }
        let feeder = Feeder {
            buses,
            lines,
            substation,
            v_min: v_bounds.0,
            v_max: v_bounds.1,
            base_kv,
            base_kva,
            line_groups,
            parent_line,
            order,
        };
        feeder.check_phases()?;
        Ok(feeder)
    }

    fn check_phases(&self) -> Result<(), CaseError> {
        for (k, l) in self.lines.iter().enumerate() {
            for p in 0..3 {
                if l.phases[p] && !(self.buses[l.from].phases[p] && self.buses[l.to].phases[p]) {
                    return Err(CaseError::Schema(format!(
                        "line {} carries phase {} missing at an endpoint",
                        self.line_name(k),
                        PHASE_NAMES[p]
                    )));
                }
            }
        }
        for (j, b) in self.buses.iter().enumerate() {
            if let Some(k) = self.parent_line[j] {
                for p in 0..3 {
                    if b.phases[p] && !self.lines[k].phases[p] {
                        return Err(CaseError::Schema(format!(
                            "phase {} of bus {} is not energized",
                            PHASE_NAMES[p], b.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_name(&self, k: usize) -> String {
        let l = &self.lines[k];
        format!("{}-{}", self.buses[l.from].id, self.buses[l.to].id)
    }

    /// Lines leaving bus `j` toward the leaves.
    pub fn children(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines.iter().enumerate().filter(move |(_, l)| l.from == j).map(|(k, _)| k)
    }

    /// Buses in the subtree rooted at `j`, `j` included.
    pub fn subtree(&self, j: usize) -> Vec<usize> {
        let mut out = vec![j];
        let mut i = 0;
        while i < out.len() {
            let b = out[i];
            out.extend(self.children(b).map(|k| self.lines[k].to));
            i += 1;
        }
        out
    }

    pub fn der_buses(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&j| self.buses[j].der.is_some()).collect()
    }

    pub fn bess_buses(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&j| self.buses[j].bess).collect()
    }

    pub fn transformer_buses(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&j| self.buses[j].transformer.is_some()).collect()
    }
}

/// Checks that `edges` form a spanning tree over `buses` rooted at
/// `substation`.
pub fn validate_radial(buses: &[String], edges: &[(usize, usize)], substation: usize) -> Result<(), CaseError> {
    let n = buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut cycle = Vec::new();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            cycle.push(format!("{}-{}", buses[a], buses[b]));
        } else {
            parent[ra] = rb;
        }
    }
    if !cycle.is_empty() {
        return Err(CaseError::NonRadial(cycle));
    }
    let root = find(&mut parent, substation);
    let cut: Vec<String> = (0..n).filter(|&j| find(&mut parent, j) != root).map(|j| buses[j].clone()).collect();
    if !cut.is_empty() {
        return Err(CaseError::Disconnected(cut));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    pub steps: usize,
    pub step_hours: f64,
    /// Repetitions of the horizon per year; multiplies every energy term.
    pub annual_scale: f64,
    /// Real load per bus and phase, kW.
    pub load_p: Vec<[Vec<f64>; 3]>,
    /// Reactive load per bus and phase, kvar.
    pub load_q: Vec<[Vec<f64>; 3]>,
    pub lmp: Vec<f64>,
    /// Production factor per DER bus (empty for other buses).
    pub production: Vec<Vec<f64>>,
    pub period_of: Vec<usize>,
    pub period_price: Vec<f64>,
    /// Billing months represented by each demand period.
    pub period_weight: Vec<f64>,
}

impl TimeSeriesSet {
    /// Annual hours represented by one step.
    pub fn step_weight(&self) -> f64 {
        self.step_hours * self.annual_scale
    }

    pub fn num_periods(&self) -> usize {
        self.period_price.len()
    }

    /// Real load of bus `j` summed over phases at step `t`.
    pub fn bus_load(&self, j: usize, t: usize) -> f64 {
        self.load_p[j].iter().map(|s| s.get(t).copied().unwrap_or(0.0)).sum()
    }

    pub fn bus_peak(&self, j: usize) -> f64 {
        (0..self.steps).map(|t| self.bus_load(j, t)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerEconomics {
    pub r_e: f64,
    pub r_c: f64,
    pub wacc: f64,
    pub years: u32,
    pub c_bkw: f64,
    pub c_bkwh: f64,
    pub eta: f64,
    pub price_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvestorEconomics {
    pub r_e: f64,
    pub r_c: f64,
    pub ror: f64,
    pub c_kw: f64,
    pub c_om: f64,
    pub c_imp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Economics {
    pub planner: PlannerEconomics,
    pub investor: InvestorEconomics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub name: String,
    pub feeder: Feeder,
    pub series: TimeSeriesSet,
    pub economics: Economics,
    /// Defaults and derived choices applied while loading.
    pub provenance: Vec<String>,
    /// SHA-256 over the case document and every referenced series file.
    pub hash: String,
}

impl Case {
    /// Keeps the first `steps` steps. Energy and demand weights are rescaled
    /// so the shortened horizon still represents one year.
    pub fn with_horizon(&self, steps: usize) -> Result<Case, CaseError> {
        let s = &self.series;
        if steps == 0 || steps > s.steps {
            return Err(CaseError::Schema(format!("horizon {steps} outside 1..={}", s.steps)));
        }
        if steps == s.steps {
            return Ok(self.clone());
        }
        let cut = |v: &Vec<f64>| if v.is_empty() { Vec::new() } else { v[..steps].to_vec() };
        let cut3 = |a: &[Vec<f64>; 3]| [cut(&a[0]), cut(&a[1]), cut(&a[2])];
        let used: Vec<usize> = {
            let mut u: Vec<usize> = s.period_of[..steps].to_vec();
            u.sort_unstable();
            u.dedup();
            u
        };
        let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let kept: f64 = used.iter().map(|&p| s.period_weight[p]).sum();
        let total: f64 = s.period_weight.iter().sum();
        let series = TimeSeriesSet {
            steps,
            step_hours: s.step_hours,
            annual_scale: s.annual_scale * s.steps as f64 / steps as f64,
            load_p: s.load_p.iter().map(cut3).collect(),
            load_q: s.load_q.iter().map(cut3).collect(),
            lmp: cut(&s.lmp),
            production: s.production.iter().map(cut).collect(),
            period_of: s.period_of[..steps].iter().map(|p| remap[p]).collect(),
            period_price: used.iter().map(|&p| s.period_price[p]).collect(),
            period_weight: used.iter().map(|&p| s.period_weight[p] * total / kept).collect(),
        };
        let mut case = self.clone();
        case.series = series;
        case.provenance.push(format!(
            "horizon truncated to {steps} of {} steps; energy and demand weights rescaled to one year",
            s.steps
        ));
        Ok(case)
    }
}

fn parse_phases(s: &str, what: &str) -> Result<[bool; 3], CaseError> {
    let mut out = [false; 3];
    for ch in s.chars() {
        let p = PHASE_NAMES
            .iter()
            .position(|&c| c == ch.to_ascii_lowercase())
            .ok_or_else(|| CaseError::Schema(format!("{what}: bad phase `{ch}`")))?;
        out[p] = true;
    }
    if !out.iter().any(|&p| p) {
        return Err(CaseError::Schema(format!("{what}: no phases")));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>, CaseError> {
    fs::read(path).map_err(|source| CaseError::Io { path: path.to_path_buf(), source })
}

struct SeriesRow {
    bus: String,
    phase: String,
    values: Vec<f64>,
}

fn parse_series(bytes: &[u8], file: &str, steps: usize) -> Result<Vec<SeriesRow>, CaseError> {
    let err = |msg: String| CaseError::Csv { file: file.to_string(), msg };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let header = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "bus" || &header[1] != "phase" {
        return Err(err("header must start with `bus,phase`".into()));
    }
    for (i, h) in header.iter().skip(2).enumerate() {
        if h != format!("t{i}") {
            return Err(err(format!("column {} should be `t{i}`, found `{h}`", i + 2)));
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let bus = rec.get(0).unwrap_or("").to_string();
        let phase = rec.get(1).unwrap_or("").to_string();
        let values: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().map_err(|e| err(format!("{bus}/{phase}: `{v}`: {e}"))))
            .collect::<Result<_, _>>()?;
        if values.len() != steps {
            return Err(CaseError::LengthMismatch {
                file: file.to_string(),
                row: format!("{bus}/{phase}"),
                expected: steps,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("{bus}/{phase}: non-finite value")));
        }
        rows.push(SeriesRow { bus, phase, values });
    }
    Ok(rows)
}

fn positive(x: f64, what: &str) -> Result<f64, CaseError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CaseError::Schema(format!("{what} must be positive, got {x}")))
    }
}

fn rate(x: f64, what: &str) -> Result<f64, CaseError> {
    if (0.0..1.0).contains(&x) {
        Ok(x)
    } else {
        Err(CaseError::Schema(format!("{what} must lie in [0, 1), got {x}")))
    }
}

/// Cost of upgrading a line: `length × 200 + 15,000` dollars.
pub fn line_upgrade_cost(length_ft: f64) -> f64 {
    length_ft * 200.0 + 15_000.0
}

/// Loads, validates and resolves a case file.
pub fn load_case(path: &Path) -> Result<Case, CaseError> {
    let bytes = read(path)?;
    let file: CaseFile =
        serde_json::from_slice(&bytes).map_err(|e| CaseError::Schema(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    resolve(file, dir, &mut hasher)
}

/// Resolves an in-memory case document; series paths are relative to `dir`.
pub fn resolve_case(file: CaseFile, dir: &Path) -> Result<Case, CaseError> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&file).map_err(|e| CaseError::Schema(e.to_string()))?);
    resolve(file, dir, &mut hasher)
}

fn resolve(file: CaseFile, dir: &Path, hasher: &mut Sha256) -> Result<Case, CaseError> {
    let mut prov = Vec::new();
    let ts = &file.timeseries;
    if ts.steps == 0 {
        return Err(CaseError::Schema("timeseries.steps must be positive".into()));
    }
    positive(ts.step_hours, "timeseries.step_hours")?;
    positive(file.base_kv, "base_kv")?;
    positive(file.base_kva, "base_kva")?;
    let steps = ts.steps;

    let pe = &file.economics.planner;
    let ie = &file.economics.investor;
    for (x, what) in [
        (pe.r_e, "planner.r_e"),
        (pe.r_c, "planner.r_c"),
        (pe.wacc, "planner.wacc"),
        (ie.r_e, "investor.r_e"),
        (ie.r_c, "investor.r_c"),
        (ie.ror, "investor.ror"),
    ] {
        rate(x, what)?;
    }
    if pe.years == 0 {
        return Err(CaseError::Schema("planner.years must be at least 1".into()));
    }
    if !(pe.eta > 0.0 && pe.eta <= 1.0) {
        return Err(CaseError::Schema(format!("planner.eta must lie in (0, 1], got {}", pe.eta)));
    }
    let price_cap = match pe.price_cap {
        Some(c) => c,
        None => {
            prov.push(format!("price signal cap defaults to the investor import price {}", ie.c_imp));
            ie.c_imp
        }
    };
    let economics = Economics {
        planner: PlannerEconomics {
            r_e: pe.r_e,
            r_c: pe.r_c,
            wacc: pe.wacc,
            years: pe.years,
            c_bkw: pe.c_bkw,
            c_bkwh: pe.c_bkwh,
            eta: pe.eta,
            price_cap,
        },
        investor: InvestorEconomics {
            r_e: ie.r_e,
            r_c: ie.r_c,
            ror: ie.ror,
            c_kw: ie.c_kw,
            c_om: ie.c_om,
            c_imp: ie.c_imp,
        },
    };

    // Buses and lines.
    let mut index = HashMap::new();
    for (i, b) in file.buses.iter().enumerate() {
        if index.insert(b.id.clone(), i).is_some() {
            return Err(CaseError::Schema(format!("duplicate bus `{}`", b.id)));
        }
    }
    let bus_of = |id: &str| index.get(id).copied().ok_or_else(|| CaseError::UnknownBus(id.to_string()));
    let substation = bus_of(&file.substation)?;

    let mut lines = Vec::with_capacity(file.lines.len());
    let mut groups: Vec<LineGroup> = Vec::new();
    for spec in &file.lines {
        let from = bus_of(&spec.from)?;
        let to = bus_of(&spec.to)?;
        let name = format!("{}-{}", spec.from, spec.to);
        let phases = parse_phases(&spec.phases, &name)?;
        let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                let (re, im) = (spec.z_ohm.re[p][q], spec.z_ohm.im[p][q]);
                if !re.is_finite() || !im.is_finite() {
                    return Err(CaseError::Schema(format!("line {name}: non-finite impedance")));
                }
                if (re - spec.z_ohm.re[q][p]).abs() > 1e-12 || (im - spec.z_ohm.im[q][p]).abs() > 1e-12 {
                    return Err(CaseError::Schema(format!("line {name}: impedance matrix not symmetric")));
                }
                if phases[p] && phases[q] {
                    z[p][q] = Complex64::new(re, im);
                }
            }
        }
        if let Some(r) = spec.rating_kw {
            positive(r, &format!("line {name} rating"))?;
        }
        let upgrade = match &spec.upgrade {
            None => None,
            Some(u) => {
                positive(u.delta_kw, &format!("line {name} upgrade"))?;
                if spec.rating_kw.is_none() {
                    return Err(CaseError::Schema(format!("line {name}: upgrade without a rating")));
                }
                let cost = match u.cost {
                    Some(c) => c,
                    None => line_upgrade_cost(spec.length_ft),
                };
                let gname = u.group.clone().unwrap_or_else(|| name.clone());
                let g = match groups.iter().position(|g| g.name == gname) {
                    Some(g) => g,
                    None => {
                        groups.push(LineGroup { name: gname, lines: Vec::new(), cost: 0.0 });
                        groups.len() - 1
                    }
                };
                groups[g].lines.push(lines.len());
                groups[g].cost += cost;
                Some(LineUpgrade { delta_kw: u.delta_kw, group: g })
            }
        };
        lines.push(Line {
            from,
            to,
            phases,
            length_ft: spec.length_ft,
            z_ohm: z,
            rating_kw: spec.rating_kw,
            upgrade,
        });
    }
    if !groups.is_empty() {
        prov.push("line upgrade costs resolved as length x 200 + 15,000 where not given".into());
    }

    // Series.
    let mut load_p = vec![[Vec::new(), Vec::new(), Vec::new()]; file.buses.len()];
    let mut load_q = load_p.clone();
    let mut buses_phases = Vec::with_capacity(file.buses.len());
    for b in &file.buses {
        buses_phases.push(parse_phases(&b.phases, &b.id)?);
    }
    let series_file = |name: &str, hasher: &mut Sha256| -> Result<Vec<SeriesRow>, CaseError> {
        let bytes = read(&dir.join(name))?;
        hasher.update(&bytes);
        parse_series(&bytes, name, steps)
    };
    let fill = |rows: Vec<SeriesRow>, file: &str, target: &mut Vec<[Vec<f64>; 3]>| -> Result<(), CaseError> {
        for row in rows {
            let j = bus_of(&row.bus)?;
            let ph = parse_phases(&row.phase, &format!("{file}: {}", row.bus))?;
            let count = ph.iter().filter(|&&p| p).count() as f64;
            for p in 0..3 {
                if !ph[p] {
                    continue;
                }
                if !buses_phases[j][p] {
                    return Err(CaseError::Csv {
                        file: file.to_string(),
                        msg: format!("bus {} has no phase {}", row.bus, PHASE_NAMES[p]),
                    });
                }
                if !target[j][p].is_empty() {
                    return Err(CaseError::Csv {
                        file: file.to_string(),
                        msg: format!("duplicate series for {}/{}", row.bus, PHASE_NAMES[p]),
                    });
                }
                target[j][p] = row.values.iter().map(|v| v / count).collect();
            }
        }
        Ok(())
    };
    let rows = series_file(&ts.loads, hasher)?;
    fill(rows, &ts.loads, &mut load_p)?;
    for (j, b) in buses_phases.iter().enumerate() {
        for p in 0..3 {
            if b[p] && load_p[j][p].is_empty() {
                load_p[j][p] = vec![0.0; steps];
            }
        }
    }
    match &ts.reactive {
        Some(name) => {
            let rows = series_file(name, hasher)?;
            fill(rows, name, &mut load_q)?;
            for (j, b) in buses_phases.iter().enumerate() {
                for p in 0..3 {
                    if b[p] && load_q[j][p].is_empty() {
                        load_q[j][p] = vec![0.0; steps];
                    }
                }
            }
        }
        None => {
            let pf = ts.power_factor.unwrap_or(DEFAULT_POWER_FACTOR);
            if !(pf > 0.0 && pf <= 1.0) {
                return Err(CaseError::Schema(format!("power factor {pf} outside (0, 1]")));
            }
            let k = (1.0 - pf * pf).sqrt() / pf;
            for (j, phases) in load_p.iter().enumerate() {
                for p in 0..3 {
                    load_q[j][p] = phases[p].iter().map(|v| v * k).collect();
                }
            }
            prov.push(format!("reactive load derived from power factor {pf} (lagging)"));
        }
    }

    let lmp_rows = series_file(&ts.lmp, hasher)?;
    if lmp_rows.len() != 1 {
        return Err(CaseError::Csv { file: ts.lmp.clone(), msg: "expected exactly one LMP row".into() });
    }
    let lmp = lmp_rows.into_iter().next().unwrap().values;

    let mut production = vec![Vec::new(); file.buses.len()];
    for row in series_file(&ts.production, hasher)? {
        let j = bus_of(&row.bus)?;
        if row.values.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(CaseError::Csv {
                file: ts.production.clone(),
                msg: format!("production factor for {} outside [0, 1]", row.bus),
            });
        }
        production[j] = row.values;
    }

    // Demand periods.
    let (period_of, n_periods) = match &ts.demand_periods {
        Some(dp) => {
            if dp.map.len() != steps {
                return Err(CaseError::LengthMismatch {
                    file: "demand_periods.map".into(),
                    row: "map".into(),
                    expected: steps,
                    found: dp.map.len(),
                });
            }
            let n = dp.map.iter().max().map_or(0, |m| m + 1);
            (dp.map.clone(), n)
        }
        None => {
            let hours_in = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
            let mut ends = Vec::with_capacity(12);
            let mut acc = 0.0;
            for d in hours_in {
                acc += d as f64 * 24.0;
                ends.push(acc);
            }
            let map: Vec<usize> = (0..steps)
                .map(|t| {
                    let h = (t as f64 * ts.step_hours) % HOURS_PER_YEAR;
                    ends.iter().position(|&e| h < e).unwrap_or(11)
                })
                .collect();
            prov.push("demand periods default to the 12 calendar months".into());
            (map, 12)
        }
    };
    let mut used = vec![false; n_periods];
    for &s in &period_of {
        used[s] = true;
    }
    let period_price = match ts.demand_periods.as_ref().and_then(|d| d.prices.clone()) {
        Some(p) if p.len() == n_periods => p,
        Some(p) => {
            return Err(CaseError::Schema(format!("{} demand prices for {n_periods} periods", p.len())));
        }
        None => vec![file.economics.planner.c_dem; n_periods],
    };
    let period_weight = match ts.demand_periods.as_ref().and_then(|d| d.weights.clone()) {
        Some(w) if w.len() == n_periods => w,
        Some(w) => {
            return Err(CaseError::Schema(format!("{} demand weights for {n_periods} periods", w.len())));
        }
        None => {
            let active = used.iter().filter(|&&u| u).count().max(1) as f64;
            prov.push(format!("each active demand period weighted {:.6} billing months", 12.0 / active));
            used.iter().map(|&u| if u { 12.0 / active } else { 0.0 }).collect()
        }
    };
    let annual_scale = match ts.annual_scale {
        Some(a) => positive(a, "timeseries.annual_scale")?,
        None => {
            let a = HOURS_PER_YEAR / (steps as f64 * ts.step_hours);
            prov.push(format!("horizon annualized by repeating it {a:.6} times per year"));
            a
        }
    };

    // Buses.
    let mut buses = Vec::with_capacity(file.buses.len());
    for (j, b) in file.buses.iter().enumerate() {
        let transformer = match &b.transformer {
            None => None,
            Some(t) => {
                positive(t.rating_kw, &format!("bus {} transformer rating", b.id))?;
                positive(t.upgrade_kw, &format!("bus {} transformer upgrade", b.id))?;
                Some(Transformer {
                    rating_kw: t.rating_kw,
                    upgrade_kw: t.upgrade_kw,
                    cost: t.cost.unwrap_or(pe.c_trf),
                })
            }
        };
        let der = match &b.der {
            None => None,
            Some(d) => {
                if production[j].is_empty() {
                    return Err(CaseError::Schema(format!("DER bus {} has no production factor", b.id)));
                }
                let peak = (0..steps).map(|t| (0..3).map(|p| load_p[j][p].get(t).copied().unwrap_or(0.0)).sum::<f64>()).fold(0.0, f64::max);
                let cap = match d.site_cap_kw {
                    Some(c) => positive(c, &format!("bus {} site cap", b.id))?,
                    None => {
                        prov.push(format!("site cap at bus {} defaults to twice its peak demand ({:.3} kW)", b.id, 2.0 * peak));
                        2.0 * peak
                    }
                };
                Some(DerSite {
                    site_cap_kw: cap,
                    c_kw: d.c_kw.unwrap_or(ie.c_kw),
                    c_imp: d.c_imp.unwrap_or(ie.c_imp),
                })
            }
        };
        buses.push(Bus { id: b.id.clone(), phases: buses_phases[j], der, bess: b.bess, transformer });
    }

    let v_bounds = match file.voltage_bounds {
        Some([lo, hi]) if lo > 0.0 && lo < hi => (lo, hi),
        Some([lo, hi]) => return Err(CaseError::Schema(format!("voltage bounds [{lo}, {hi}] invalid"))),
        None => {
            prov.push(format!("voltage-squared bounds default to [{DEFAULT_V_MIN}, {DEFAULT_V_MAX}] pu"));
            (DEFAULT_V_MIN, DEFAULT_V_MAX)
        }
    };
    prov.push("substation voltage fixed at 1.0 pu on every phase".into());

    let feeder = Feeder::new(buses, lines, substation, v_bounds, file.base_kv, file.base_kva, groups)?;
    let series = TimeSeriesSet {
        steps,
        step_hours: ts.step_hours,
        annual_scale,
        load_p,
        load_q,
        lmp,
        production,
        period_of,
        period_price,
        period_weight,
    };
    let hash = hasher.clone().finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Ok(Case { name: file.name, feeder, series, economics, provenance: prov, hash })
}

// ---------------------------------------------------------------------------
// Overload screening

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    Transformer(usize),
    Line(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverloadEntry {
    pub component: Component,
    pub name: String,
    pub peak_kw: f64,
    pub rating_kw: f64,
    pub percent: f64,
    pub overloaded: bool,
}

/// Peak per-phase demand downstream of every rated component divided by its
/// rating. Lossless screening: flows are plain sums of the load series.
pub fn overload_report(case: &Case) -> Vec<OverloadEntry> {
    let f = &case.feeder;
    let s = &case.series;
    let peak_of = |buses: &[usize]| {
        let mut peak: f64 = 0.0;
        for p in 0..3 {
            for t in 0..s.steps {
                let sum: f64 = buses.iter().map(|&j| s.load_p[j][p].get(t).copied().unwrap_or(0.0)).sum();
                peak = peak.max(sum);
            }
        }
        peak
    };
    let mut out = Vec::new();
    for j in f.transformer_buses() {
        let t = f.buses[j].transformer.as_ref().unwrap();
        let peak = peak_of(&[j]);
        out.push(entry(Component::Transformer(j), format!("trf {}", f.buses[j].id), peak, t.rating_kw));
    }
    for (k, l) in f.lines.iter().enumerate() {
        if let Some(r) = l.rating_kw {
            let peak = peak_of(&f.subtree(l.to));
            out.push(entry(Component::Line(k), format!("line {}", f.line_name(k)), peak, r));
        }
    }
    out
}

fn entry(component: Component, name: String, peak_kw: f64, rating_kw: f64) -> OverloadEntry {
    let percent = 100.0 * peak_kw / rating_kw;
    OverloadEntry { component, name, peak_kw, rating_kw, percent, overloaded: percent > 100.0 + 1e-9 }
}

/// Overloaded transformer buses and overloaded line groups.
pub fn overloaded_upgrades(case: &Case) -> (Vec<usize>, Vec<usize>) {
    let mut trf = Vec::new();
    let mut groups = BTreeMap::new();
    for e in overload_report(case).into_iter().filter(|e| e.overloaded) {
        match e.component {
            Component::Transformer(j) => trf.push(j),
            Component::Line(k) => {
                if let Some(u) = &case.feeder.lines[k].upgrade {
                    groups.insert(u.group, ());
                }
            }
        }
    }
    (trf, groups.into_keys().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn radial_checks() {
        let edges: Vec<(usize, usize)> = (1..13).map(|j| (j - 1, j)).collect();
        assert!(validate_radial(&names(13), &edges, 0).is_ok());
        assert!(matches!(validate_radial(&names(13), &edges[..11], 0), Err(CaseError::Disconnected(_))));
        let mut par = edges.clone();
        par.push((3, 4));
        assert!(matches!(validate_radial(&names(13), &par, 0), Err(CaseError::NonRadial(_))));
    }

    #[test]
    fn upgrade_cost_rule() {
        assert_eq!(line_upgrade_cost(500.0), 115_000.0);
    }

    #[test]
    fn overload_arithmetic() {
        let e = entry(Component::Line(0), "l".into(), 715.0, 500.0);
        assert!((e.percent - 143.0).abs() < 1e-12 && e.overloaded);
        let e = entry(Component::Line(0), "l".into(), 90.0, 100.0);
        assert!((e.percent - 90.0).abs() < 1e-12 && !e.overloaded);
    }
}
