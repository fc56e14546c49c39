//! Upper-level (planner) decisions: storage, upgrades, feeder-head energy
//! and demand charges.

use nwa_lp::{ConId, LinExpr, Model, ModelError, Sense, VarId};

use crate::network::{Case, PHASE_NAMES};
use crate::powerflow::{FlowHandles, Injections};

/// Present worth factor `Σ_{y=1..n} [(1+r_e)(1+r_c)/(1+d)]^y`.
pub fn pwf(r_e: f64, r_c: f64, discount: f64, n_years: u32) -> f64 {
    let g = (1.0 + r_e) * (1.0 + r_c) / (1.0 + discount);
    (1..=n_years).map(|y| g.powi(y as i32)).sum()
}

pub fn pwf_planner(case: &Case) -> f64 {
    let p = &case.economics.planner;
    pwf(p.r_e, p.r_c, p.wacc, p.years)
}

/// Storage at one bus and phase. Time-indexed vectors have one entry per
/// step; `soc[t]` is the state after step `t`.
#[derive(Debug, Clone)]
pub struct BessUnit {
    pub bus: usize,
    pub phase: usize,
    pub kw: VarId,
    pub kwh: VarId,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub soc: Vec<VarId>,
}

#[derive(Debug, Clone, Default)]
pub struct BessHandles {
    pub units: Vec<BessUnit>,
}

impl BessHandles {
    pub fn capex(&self, case: &Case) -> LinExpr {
        let pe = &case.economics.planner;
        let mut e = LinExpr::new();
        for u in &self.units {
            e.add_term(u.kw, pe.c_bkw);
            e.add_term(u.kwh, pe.c_bkwh);
        }
        e
    }

    /// Adds each unit's net discharge to the bus injection.
    pub fn add_injections(&self, inj: &mut Injections) {
        for u in &self.units {
            for t in 0..u.charge.len() {
                let e = &mut inj.p[u.bus][u.phase][t];
                e.add_term(u.discharge[t], 1.0);
                e.add_term(u.charge[t], -1.0);
            }
        }
    }
}

/// Storage sizing and dispatch at every candidate bus and phase:
/// `soc_t = soc_{t−1} + η·Δ·ch_t − Δ·dis_t/η`, `ch + dis ≤ kW`,
/// `soc ≤ kWh`, initial and final state equal to half the energy rating.
pub fn build_bess(model: &mut Model, case: &Case) -> Result<BessHandles, ModelError> {
    let f = &case.feeder;
    let steps = case.series.steps;
    let dt = case.series.step_hours;
    let eta = case.economics.planner.eta;
    let inf = f64::INFINITY;
    let mut units = Vec::new();
    for j in f.bess_buses() {
        let id = &f.buses[j].id;
        for p in f.buses[j].phase_list() {
            let tag = format!("{id}_{}", PHASE_NAMES[p]);
            let kw = model.continuous(format!("bkw_{tag}"), 0.0, inf)?;
            let kwh = model.continuous(format!("bkwh_{tag}"), 0.0, inf)?;
            let mut charge = Vec::with_capacity(steps);
            let mut discharge = Vec::with_capacity(steps);
            let mut soc = Vec::with_capacity(steps);
            for t in 0..steps {
                charge.push(model.continuous(format!("bch_{tag}_{t}"), 0.0, inf)?);
                discharge.push(model.continuous(format!("bdis_{tag}_{t}"), 0.0, inf)?);
                soc.push(model.continuous(format!("bsoc_{tag}_{t}"), 0.0, inf)?);
            }
            for t in 0..steps {
                let mut e = LinExpr::new();
                e.add_term(soc[t], 1.0);
                if t == 0 {
                    e.add_term(kwh, -0.5);
                } else {
                    e.add_term(soc[t - 1], -1.0);
                }
                e.add_term(charge[t], -eta * dt);
                e.add_term(discharge[t], dt / eta);
                model.add_constraint(e, Sense::Eq, 0.0, format!("bsocr_{tag}_{t}"))?;
                let e = LinExpr::from_terms([(charge[t], 1.0), (discharge[t], 1.0), (kw, -1.0)]);
                model.add_constraint(e, Sense::Le, 0.0, format!("bpow_{tag}_{t}"))?;
                let e = LinExpr::from_terms([(soc[t], 1.0), (kwh, -1.0)]);
                model.add_constraint(e, Sense::Le, 0.0, format!("bcap_{tag}_{t}"))?;
            }
            let e = LinExpr::from_terms([(soc[steps - 1], 1.0), (kwh, -0.5)]);
            model.add_constraint(e, Sense::Eq, 0.0, format!("bend_{tag}"))?;
            units.push(BessUnit { bus: j, phase: p, kw, kwh, charge, discharge, soc });
        }
    }
    Ok(BessHandles { units })
}

#[derive(Debug, Clone, Default)]
pub struct UpgradeHandles {
    /// `(bus, z)` per transformer.
    pub transformer: Vec<(usize, VarId)>,
    /// `(group, z)` per line group.
    pub line_group: Vec<(usize, VarId)>,
    pub limit_rows: Vec<ConId>,
}

impl UpgradeHandles {
    pub fn transformer_capex(&self, case: &Case) -> LinExpr {
        LinExpr::from_terms(
            self.transformer
                .iter()
                .map(|&(j, z)| (z, case.feeder.buses[j].transformer.as_ref().unwrap().cost)),
        )
    }

    pub fn line_capex(&self, case: &Case) -> LinExpr {
        LinExpr::from_terms(self.line_group.iter().map(|&(g, z)| (z, case.feeder.line_groups[g].cost)))
    }
}

/// Upgrade binaries and the limits `|P| ≤ R + z·ΔR` on transformer bus
/// injections and upgradable line flows, per phase and step.
pub fn build_upgrades(
    model: &mut Model,
    case: &Case,
    flows: &FlowHandles,
    inj: &Injections,
) -> Result<UpgradeHandles, ModelError> {
    let f = &case.feeder;
    let steps = case.series.steps;
    let mut h = UpgradeHandles::default();
    for j in f.transformer_buses() {
        let trf = f.buses[j].transformer.as_ref().unwrap();
        let id = &f.buses[j].id;
        let z = model.binary(format!("ztrf_{id}"))?;
        h.transformer.push((j, z));
        for p in f.buses[j].phase_list() {
            for t in 0..steps {
                let e = &inj.p[j][p][t];
                for (sign, tag) in [(1.0, "up"), (-1.0, "lo")] {
                    let mut row = LinExpr::new();
                    row.add_scaled(e, sign);
                    row.add_term(z, -trf.upgrade_kw);
                    let name = format!("trf{tag}_{id}_{}_{t}", PHASE_NAMES[p]);
                    h.limit_rows.push(model.add_constraint(row, Sense::Le, trf.rating_kw, name)?);
                }
            }
        }
    }
    for (g, group) in f.line_groups.iter().enumerate() {
        let z = model.binary(format!("zline_{}", group.name))?;
        h.line_group.push((g, z));
        for &k in &group.lines {
            let line = &f.lines[k];
            let rating = line.rating_kw.unwrap();
            let delta = line.upgrade.as_ref().unwrap().delta_kw;
            let name = f.line_name(k);
            for p in line.phase_list() {
                for t in 0..steps {
                    for (sign, tag) in [(1.0, "up"), (-1.0, "lo")] {
                        let row = LinExpr::from_terms([(flows.p_line[k][p][t], sign), (z, -delta)]);
                        let cname = format!("line{tag}_{name}_{}_{t}", PHASE_NAMES[p]);
                        h.limit_rows.push(model.add_constraint(row, Sense::Le, rating, cname)?);
                    }
                }
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct HeadHandles {
    /// `P⁺ ≥ max(0, P_0)` per phase and step.
    pub p_plus: [Vec<VarId>; 3],
    /// Peak head demand per demand period.
    pub p_max: Vec<VarId>,
    pub energy: LinExpr,
    pub demand: LinExpr,
}

/// Feeder-head energy and demand-charge terms, already discounted by the
/// planner's present worth factor.
pub fn build_head_costs(model: &mut Model, case: &Case, flows: &FlowHandles) -> Result<HeadHandles, ModelError> {
    let s = &case.series;
    let pwf_ul = pwf_planner(case);
    let weight = s.step_weight();
    let mut p_plus: [Vec<VarId>; 3] = Default::default();
    let mut energy = LinExpr::new();
    for p in 0..3 {
        for (t, &p0) in flows.p_head[p].iter().enumerate() {
            let v = model.continuous(format!("P0plus_{}_{t}", PHASE_NAMES[p]), 0.0, f64::INFINITY)?;
            model.add_constraint(
                LinExpr::from_terms([(v, 1.0), (p0, -1.0)]),
                Sense::Ge,
                0.0,
                format!("headpos_{}_{t}", PHASE_NAMES[p]),
            )?;
            energy.add_term(v, pwf_ul * s.lmp[t] * weight);
            p_plus[p].push(v);
        }
    }
    let mut p_max = Vec::with_capacity(s.num_periods());
    let mut demand = LinExpr::new();
    for sidx in 0..s.num_periods() {
        let v = model.continuous(format!("Pmax_{sidx}"), 0.0, f64::INFINITY)?;
        demand.add_term(v, pwf_ul * s.period_price[sidx] * s.period_weight[sidx]);
        p_max.push(v);
    }
    for t in 0..s.steps {
        let mut e = LinExpr::term(p_max[s.period_of[t]], 1.0);
        for p in 0..3 {
            if let Some(&p0) = flows.p_head[p].get(t) {
                e.add_term(p0, -1.0);
            }
        }
        model.add_constraint(e, Sense::Ge, 0.0, format!("peak_{t}"))?;
    }
    Ok(HeadHandles { p_plus, p_max, energy, demand })
}

/// Objective parts, each a discounted dollar amount.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveParts {
    pub bess_capex: LinExpr,
    pub transformer_capex: LinExpr,
    pub line_capex: LinExpr,
    pub energy: LinExpr,
    pub demand: LinExpr,
    /// Planner payment to DER investors, `a·Σ x^λ·y^EXP`.
    pub der_payment: LinExpr,
}

impl ObjectiveParts {
    pub fn total(&self) -> LinExpr {
        let mut e = LinExpr::new();
        for part in [&self.bess_capex, &self.transformer_capex, &self.line_capex, &self.energy, &self.demand, &self.der_payment] {
            e.add_scaled(part, 1.0);
        }
        e
    }
}

pub fn assemble_planner_objective(model: &mut Model, parts: &ObjectiveParts) -> Result<LinExpr, ModelError> {
    let obj = parts.total();
    model.set_objective(obj.clone())?;
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwf_unit() {
        assert!((pwf(0.0, 0.0, 0.0, 1) - 1.0).abs() < 1e-15);
        assert!((pwf(0.0, 0.0, 0.0, 20) - 20.0).abs() < 1e-12);
    }
}
