//! Three-phase unbalanced LinDistFlow.
//!
//! Per node, phase and step: real and reactive balance
//! `P_ij + P_j − Σ_k P_jk = 0` with `P_j` the net injection (generation minus
//! load). Per line and step: `v_j = v_i + M^P·P_ij + M^Q·Q_ij` with `v` the
//! squared voltage magnitude in pu. The substation injection is the feeder
//! head power `P_0`; substation voltage is fixed at 1.0 pu².

use num_complex::Complex64;
use nwa_lp::{ConId, LinExpr, Model, ModelError, Sense, VarId};
use thiserror::Error;

use crate::network::{Case, Feeder, PHASE_NAMES};

#[derive(Debug, Error, PartialEq)]
pub enum PowerFlowError {
    #[error("base voltage and base power must be positive")]
    ZeroBase,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Voltage sensitivities of one line: `M^P`, `M^Q` in pu² per pu power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityMatrices {
    pub mp: [[f64; 3]; 3],
    pub mq: [[f64; 3]; 3],
}

pub fn gamma() -> [[Complex64; 3]; 3] {
    let a = [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0),
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0),
    ];
    let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            g[p][q] = a[p] * a[q].conj();
        }
    }
    g
}

/// `M^P = −2·Re(Γ ∘ conj Z)`, `M^Q = 2·Im(Γ ∘ conj Z)` for a per-unit phase
/// impedance matrix; absent phases are zero rows/columns.
pub fn sensitivity_from_pu(z_pu: &[[Complex64; 3]; 3], phases: [bool; 3]) -> SensitivityMatrices {
    let g = gamma();
    let mut mp = [[0.0; 3]; 3];
    let mut mq = [[0.0; 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            if phases[p] && phases[q] {
                let e = g[p][q] * z_pu[p][q].conj();
                mp[p][q] = -2.0 * e.re;
                mq[p][q] = 2.0 * e.im;
            }
        }
    }
    SensitivityMatrices { mp, mq }
}

/// Sensitivities of line `k` of `feeder` using its base voltage
/// (line-to-neutral kV) and per-phase base power (kVA).
pub fn sensitivity_matrices(feeder: &Feeder, k: usize) -> Result<SensitivityMatrices, PowerFlowError> {
    if !(feeder.base_kv > 0.0 && feeder.base_kva > 0.0) {
        return Err(PowerFlowError::ZeroBase);
    }
    let z_base = feeder.base_kv * feeder.base_kv * 1000.0 / feeder.base_kva;
    let line = &feeder.lines[k];
    let mut z = line.z_ohm;
    for row in z.iter_mut() {
        for e in row.iter_mut() {
            *e /= z_base;
        }
    }
    Ok(sensitivity_from_pu(&z, line.phases))
}

/// Net injection expressions `P_j`, `Q_j` per bus, phase and step (kW, kvar).
#[derive(Debug, Clone)]
pub struct Injections {
    pub p: Vec<[Vec<LinExpr>; 3]>,
    pub q: Vec<[Vec<LinExpr>; 3]>,
}

impl Injections {
    /// Injections equal to minus the case loads.
    pub fn from_loads(case: &Case) -> Injections {
        let s = &case.series;
        let f = &case.feeder;
        let mk = |src: &Vec<[Vec<f64>; 3]>| {
            (0..f.buses.len())
                .map(|j| {
                    let mut out: [Vec<LinExpr>; 3] = Default::default();
                    for p in f.buses[j].phase_list() {
                        out[p] = (0..s.steps).map(|t| LinExpr::constant(-src[j][p][t])).collect();
                    }
                    out
                })
                .collect()
        };
        Injections { p: mk(&s.load_p), q: mk(&s.load_q) }
    }
}

/// Handles of the LinDistFlow variables and rows. Vectors are indexed
/// `[entity][phase][t]`; absent phases are empty.
#[derive(Debug, Clone)]
pub struct FlowHandles {
    pub p_line: Vec<[Vec<VarId>; 3]>,
    pub q_line: Vec<[Vec<VarId>; 3]>,
    /// Squared voltage; empty at the substation.
    pub v: Vec<[Vec<VarId>; 3]>,
    pub p_head: [Vec<VarId>; 3],
    pub q_head: [Vec<VarId>; 3],
    pub balance_p: Vec<[Vec<ConId>; 3]>,
    pub balance_q: Vec<[Vec<ConId>; 3]>,
    pub voltage: Vec<[Vec<ConId>; 3]>,
    pub sens: Vec<SensitivityMatrices>,
    pub steps: usize,
}

/// Adds the LinDistFlow rows for `steps` steps. Lines with a rating but no
/// upgrade option get `±rating` bounds on their real flow; upgradable limits
/// are added by the planner.
pub fn build_lindistflow(model: &mut Model, case: &Case, inj: &Injections) -> Result<FlowHandles, PowerFlowError> {
    let f = &case.feeder;
    let steps = case.series.steps;
    let nb = f.buses.len();
    let nl = f.lines.len();
    let sens: Vec<SensitivityMatrices> = (0..nl).map(|k| sensitivity_matrices(f, k)).collect::<Result<_, _>>()?;
    let inf = f64::INFINITY;

    let mut p_line: Vec<[Vec<VarId>; 3]> = vec![Default::default(); nl];
    let mut q_line: Vec<[Vec<VarId>; 3]> = vec![Default::default(); nl];
    let mut v: Vec<[Vec<VarId>; 3]> = vec![Default::default(); nb];
    let mut p_head: [Vec<VarId>; 3] = Default::default();
    let mut q_head: [Vec<VarId>; 3] = Default::default();
    let mut balance_p: Vec<[Vec<ConId>; 3]> = vec![Default::default(); nb];
    let mut balance_q: Vec<[Vec<ConId>; 3]> = vec![Default::default(); nb];
    let mut voltage: Vec<[Vec<ConId>; 3]> = vec![Default::default(); nl];

    // variables first, ordered by (entity, phase, t)
    for (k, line) in f.lines.iter().enumerate() {
        let name = f.line_name(k);
        let (lo, hi) = match (line.rating_kw, &line.upgrade) {
            (Some(r), None) => (-r, r),
            _ => (-inf, inf),
        };
        for p in line.phase_list() {
            let ph = PHASE_NAMES[p];
            for t in 0..steps {
                p_line[k][p].push(model.continuous(format!("P_{name}_{ph}_{t}"), lo, hi)?);
            }
            for t in 0..steps {
                q_line[k][p].push(model.continuous(format!("Q_{name}_{ph}_{t}"), -inf, inf)?);
            }
        }
    }
    for p in f.buses[f.substation].phase_list() {
        let ph = PHASE_NAMES[p];
        for t in 0..steps {
            p_head[p].push(model.continuous(format!("P0_{ph}_{t}"), -inf, inf)?);
        }
        for t in 0..steps {
            q_head[p].push(model.continuous(format!("Q0_{ph}_{t}"), -inf, inf)?);
        }
    }
    for &j in &f.order {
        if j == f.substation {
            continue;
        }
        let b = &f.buses[j];
        for p in b.phase_list() {
            for t in 0..steps {
                v[j][p].push(model.continuous(format!("v_{}_{}_{t}", b.id, PHASE_NAMES[p]), f.v_min, f.v_max)?);
            }
        }
    }

    // real and reactive balances
    for &j in &f.order {
        let b = &f.buses[j];
        let parent = f.parent_line[j];
        let children: Vec<usize> = f.children(j).collect();
        for p in b.phase_list() {
            let ph = PHASE_NAMES[p];
            for t in 0..steps {
                for (real, out) in [(true, &mut balance_p), (false, &mut balance_q)] {
                    let flows = if real { &p_line } else { &q_line };
                    let mut e = if real { inj.p[j][p][t].clone() } else { inj.q[j][p][t].clone() };
                    match parent {
                        Some(k) => {
                            e.add_term(flows[k][p][t], 1.0);
                        }
                        None => {
                            let head = if real { &p_head } else { &q_head };
                            e.add_term(head[p][t], 1.0);
                        }
                    }
                    for &c in &children {
                        if f.lines[c].phases[p] {
                            e.add_term(flows[c][p][t], -1.0);
                        }
                    }
                    let kind = if real { "bp" } else { "bq" };
                    let id = model.add_constraint(e, Sense::Eq, 0.0, format!("{kind}_{}_{ph}_{t}", b.id))?;
                    out[j][p].push(id);
                }
            }
        }
    }

    // voltage drop along each line
    let s_base = f.base_kva;
    for (k, line) in f.lines.iter().enumerate() {
        let name = f.line_name(k);
        let m = &sens[k];
        let phases = line.phase_list();
        for &p in &phases {
            for t in 0..steps {
                let mut e = LinExpr::new();
                e.add_term(v[line.to][p][t], 1.0);
                if line.from == f.substation {
                    e.add_constant(-1.0);
                } else {
                    e.add_term(v[line.from][p][t], -1.0);
                }
                for &q in &phases {
                    e.add_term(p_line[k][q][t], -m.mp[p][q] / s_base);
                    e.add_term(q_line[k][q][t], -m.mq[p][q] / s_base);
                }
                let id = model.add_constraint(e, Sense::Eq, 0.0, format!("vd_{name}_{}_{t}", PHASE_NAMES[p]))?;
                voltage[k][p].push(id);
            }
        }
    }

    Ok(FlowHandles { p_line, q_line, v, p_head, q_head, balance_p, balance_q, voltage, sens, steps })
}

/// Largest residuals of the balance and voltage rows at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub max_balance: f64,
    /// Node, phase and step of the largest balance residual.
    pub worst_balance: Option<(String, char, usize)>,
    pub max_voltage: f64,
    pub pass: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("point has {found} values, model needs {needed}")]
    MissingValues { found: usize, needed: usize },
}

/// Recomputes the balance and voltage equations from the flow variables
/// and the injection expressions.
pub fn validate_power_balance(
    case: &Case,
    flows: &FlowHandles,
    inj: &Injections,
    point: &[f64],
    tol: f64,
) -> Result<BalanceReport, BalanceError> {
    let f = &case.feeder;
    let needed = max_var(flows).map_or(0, |v| v.0 + 1);
    if point.len() < needed {
        return Err(BalanceError::MissingValues { found: point.len(), needed });
    }
    let x = |id: VarId| point[id.0];
    let mut max_balance: f64 = 0.0;
    let mut worst = None;
    for &j in &f.order {
        let children: Vec<usize> = f.children(j).collect();
        for p in f.buses[j].phase_list() {
            for t in 0..flows.steps {
                for real in [true, false] {
                    let lines = if real { &flows.p_line } else { &flows.q_line };
                    let mut r = if real { inj.p[j][p][t].evaluate(point) } else { inj.q[j][p][t].evaluate(point) };
                    r += match f.parent_line[j] {
                        Some(k) => x(lines[k][p][t]),
                        None => x(if real { flows.p_head[p][t] } else { flows.q_head[p][t] }),
                    };
                    for &c in &children {
                        if f.lines[c].phases[p] {
                            r -= x(lines[c][p][t]);
                        }
                    }
                    if r.abs() > max_balance {
                        max_balance = r.abs();
                        worst = Some((f.buses[j].id.clone(), PHASE_NAMES[p], t));
                    }
                }
            }
        }
    }
    let mut max_voltage: f64 = 0.0;
    for (k, line) in f.lines.iter().enumerate() {
        let m = &flows.sens[k];
        let phases = line.phase_list();
        for &p in &phases {
            for t in 0..flows.steps {
                let vi = if line.from == f.substation { 1.0 } else { x(flows.v[line.from][p][t]) };
                let mut rhs = vi;
                for &q in &phases {
                    rhs += (m.mp[p][q] * x(flows.p_line[k][q][t]) + m.mq[p][q] * x(flows.q_line[k][q][t])) / f.base_kva;
                }
                max_voltage = max_voltage.max((x(flows.v[line.to][p][t]) - rhs).abs());
            }
        }
    }
    Ok(BalanceReport {
        max_balance,
        worst_balance: worst,
        max_voltage,
        pass: max_balance <= tol && max_voltage <= tol,
    })
}

fn max_var(flows: &FlowHandles) -> Option<VarId> {
    let all = flows
        .p_line
        .iter()
        .chain(&flows.q_line)
        .chain(&flows.v)
        .flat_map(|a| a.iter().flatten())
        .chain(flows.p_head.iter().flatten())
        .chain(flows.q_head.iter().flatten());
    all.max().copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_phase_reduction() {
        let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
        z[0][0] = Complex64::new(0.1, 0.2);
        let m = sensitivity_from_pu(&z, [true, false, false]);
        assert!((m.mp[0][0] + 0.2).abs() < 1e-15);
        assert!((m.mq[0][0] + 0.4).abs() < 1e-15);
        assert_eq!(m.mp[1][1], 0.0);
    }

    #[test]
    fn gamma_off_diagonal() {
        let g = gamma();
        assert!((g[0][1].re + 0.5).abs() < 1e-15);
        assert!((g[0][1].im - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }
}
