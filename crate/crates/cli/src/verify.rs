//! Post-solve checks of an accepted solution.

use nwa_core::bilevel::{
    payment_direct, payment_linearized, recover_price_signal, verify_kkt, verify_payment_identity, DualVars,
};
use nwa_core::investor::LowerLevelForm;
use nwa_core::planner::BessHandles;
use nwa_core::powerflow::{validate_power_balance, BalanceError};
use nwa_core::{Case, ScenarioOutcome};
use serde::{Deserialize, Serialize};

use crate::report::LowerLevelPoint;

pub const KKT_TOL: f64 = 1e-6;
pub const PAYMENT_TOL: f64 = 1e-6;
pub const LINEARIZATION_TOL: f64 = 1e-6;
pub const PRICE_TOL: f64 = 1e-6;
pub const ARGMIN_TOL: f64 = 1e-5;
pub const INDIFFERENCE_TOL: f64 = 1e-4;
pub const BALANCE_TOL: f64 = 1e-8;
pub const BESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KktCheck {
    pub stationarity: f64,
    pub primal: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PaymentCheck {
    pub planner_payment: f64,
    pub planner_direct: f64,
    pub investor_income: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearizationCheck {
    pub direct: f64,
    pub linearized: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceCheck {
    pub interior: usize,
    pub mismatches: usize,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArgminCheck {
    pub response: f64,
    pub argmin: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndifferenceCheck {
    pub no_signal: f64,
    pub with_signal: f64,
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceCheck {
    pub max_balance: f64,
    pub max_voltage: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BessCheck {
    /// Largest state-of-charge recursion residual, kWh.
    pub soc_recursion: f64,
    /// Largest departure of the initial or final state from half the rating.
    pub terminal: f64,
    /// Largest excess of charge plus discharge over the inverter rating.
    pub power: f64,
    /// Largest excess of the state over the energy rating.
    pub energy: f64,
    pub pass: bool,
}

/// Every check on one solution. The lower-level identities are enforced
/// only when the price signal is free; without it the payment term is
/// absent from the model and they are reported for information.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub signal_active: bool,
    pub kkt: KktCheck,
    pub payment: PaymentCheck,
    pub linearization: LinearizationCheck,
    pub price_recovery: PriceCheck,
    pub argmin: ArgminCheck,
    pub indifference: IndifferenceCheck,
    pub balance: Option<BalanceCheck>,
    pub bess: Option<BessCheck>,
}

impl Verification {
    /// Names of the enforced checks that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.signal_active {
            for (ok, name) in [
                (self.kkt.pass, "kkt"),
                (self.payment.pass, "payment"),
                (self.linearization.pass, "linearization"),
                (self.price_recovery.pass, "price-recovery"),
            ] {
                if !ok {
                    out.push(name);
                }
            }
        }
        if !self.argmin.pass {
            out.push("argmin");
        }
        if self.balance.as_ref().is_some_and(|b| !b.pass) {
            out.push("power-balance");
        }
        if self.bess.as_ref().is_some_and(|b| !b.pass) {
            out.push("bess");
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Lower-level checks from a stored point.
pub fn verify_lower_level(
    case: &Case,
    llf: &LowerLevelForm,
    point: &LowerLevelPoint,
    pwf_planner: f64,
    signal_active: bool,
) -> Result<Verification, nwa_core::investor::InvestorError> {
    let (x, y) = (&point.x, &point.y);
    let duals = DualVars { lambda: point.lambda.clone(), mu_up: point.mu_up.clone(), mu_lo: point.mu_lo.clone() };
    let k = verify_kkt(llf, y, x, &duals, KKT_TOL);
    let linearized = payment_linearized(llf, y, &duals);
    let direct = payment_direct(llf, y, &duals);
    let pay = verify_payment_identity(llf, y, x, linearized, pwf_planner, llf.pwf, PAYMENT_TOL);
    let lin_gap = relative(direct, linearized);
    let sig = recover_price_signal(llf, y, x, &duals.lambda, PRICE_TOL);
    let response = llf.objective(y, x);
    let argmin = llf.solve_at(x)?.objective;
    let argmin_gap = (response - argmin).abs() / argmin.abs().max(1.0);
    let zeros = vec![0.0; llf.num_prices()];
    let no_signal = llf.solve_at(&zeros)?;
    let npc_without = llf.result(case, &no_signal.y, &zeros).net_present_cost;
    let npc_with = llf.result(case, y, x).net_present_cost;
    let indiff = (npc_with - npc_without).abs() / npc_without.abs().max(1.0);
    Ok(Verification {
        signal_active,
        kkt: KktCheck {
            stationarity: k.stationarity,
            primal: k.primal,
            dual_sign: k.dual_sign,
            complementarity: k.complementarity,
            pass: k.pass,
        },
        payment: PaymentCheck {
            planner_payment: pay.planner_payment,
            planner_direct: pay.planner_direct,
            investor_income: pay.investor_income,
            relative_gap: pay.relative_gap,
            pass: pay.pass,
        },
        linearization: LinearizationCheck { direct, linearized, relative_gap: lin_gap, pass: lin_gap <= LINEARIZATION_TOL },
        price_recovery: PriceCheck {
            interior: sig.interior_count,
            mismatches: sig.mismatches,
            max_residual: sig.max_interior_residual,
            pass: sig.mismatches == 0,
        },
        argmin: ArgminCheck { response, argmin, relative_gap: argmin_gap, pass: argmin_gap <= ARGMIN_TOL },
        indifference: IndifferenceCheck {
            no_signal: npc_without,
            with_signal: npc_with,
            relative_gap: indiff,
            pass: indiff <= INDIFFERENCE_TOL,
        },
        balance: None,
        bess: None,
    })
}

/// Storage invariants at a model point.
pub fn check_bess(case: &Case, bess: &BessHandles, p: &[f64]) -> BessCheck {
    let eta = case.economics.planner.eta;
    let dt = case.series.step_hours;
    let mut c = BessCheck { pass: true, ..Default::default() };
    for u in &bess.units {
        let (kw, kwh) = (p[u.kw.0], p[u.kwh.0]);
        let half = 0.5 * kwh;
        let mut prev = half;
        for t in 0..u.soc.len() {
            let (ch, dis, soc) = (p[u.charge[t].0], p[u.discharge[t].0], p[u.soc[t].0]);
            c.soc_recursion = c.soc_recursion.max((soc - (prev + eta * dt * ch - dt * dis / eta)).abs());
            c.power = c.power.max(ch + dis - kw);
            c.energy = c.energy.max(soc - kwh).max(-soc);
            prev = soc;
        }
        c.terminal = c.terminal.max((prev - half).abs());
        let scale = 1.0 + kw.abs().max(kwh.abs());
        if c.soc_recursion > BESS_TOL * scale
            || c.terminal > BESS_TOL * scale
            || c.power > BESS_TOL * scale
            || c.energy > BESS_TOL * scale
        {
            c.pass = false;
        }
    }
    c
}

/// All checks on a freshly solved scenario.
pub fn verify_outcome(case: &Case, o: &ScenarioOutcome) -> Result<Verification, VerifyError> {
    let point = lower_level_point(o);
    let mut v = verify_lower_level(case, &o.sm.llf, &point, o.sm.pwf_ul, o.sm.kind.has_signal())?;
    let p = &o.solution.primal;
    let b = validate_power_balance(case, &o.sm.flows, &o.sm.inj, p, BALANCE_TOL)?;
    v.balance = Some(BalanceCheck { max_balance: b.max_balance, max_voltage: b.max_voltage, pass: b.pass });
    v.bess = Some(check_bess(case, &o.sm.bess, p));
    Ok(v)
}

pub fn lower_level_point(o: &ScenarioOutcome) -> LowerLevelPoint {
    LowerLevelPoint {
        x: o.x.clone(),
        y: o.y.clone(),
        lambda: o.duals.lambda.clone(),
        mu_up: o.duals.mu_up.clone(),
        mu_lo: o.duals.mu_lo.clone(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Investor(#[from] nwa_core::investor::InvestorError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
}
