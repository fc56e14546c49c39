//! Brute-force check of the bilevel model on tiny cases: every price vector
//! on a grid is fixed, the investor's optimal value at those prices is
//! imposed as a cut, and the planner optimizes over the rest.

use nwa_lp::{solve_milp, BnbOptions, Status};
use thiserror::Error;

use crate::investor::{build_investor_lp, InvestorError};
use crate::network::Case;
use crate::scenario::{build_fixed_signal, ScenarioError};

/// Upper limit on grid evaluations.
pub const MAX_EVALUATIONS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {0} points exceeds the limit of {MAX_EVALUATIONS}")]
    GridTooLarge(usize),
    #[error("price grid is empty")]
    EmptyGrid,
    #[error("no grid point gives a feasible planner problem")]
    NoFeasiblePoint,
    #[error(transparent)]
    Investor(#[from] InvestorError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] nwa_lp::SolveError),
    #[error(transparent)]
    Model(#[from] nwa_lp::ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best price vector, in the order of the investor's price variables.
    pub prices: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
}

/// Evenly spaced levels `0, cap/n, …, cap`.
pub fn uniform_grid(cap: f64, intervals: usize) -> Vec<f64> {
    if intervals == 0 {
        return vec![0.0];
    }
    (0..=intervals).map(|i| cap * i as f64 / intervals as f64).collect()
}

/// Planner cost at prices `x` when the investor's response is any of its
/// optimal solutions, the planner picking the one it likes best. `None`
/// when the planner has no feasible plan.
pub fn planner_cost_at(case: &Case, x: &[f64]) -> Result<Option<f64>, OracleError> {
    let sm = build_fixed_signal(case, x)?;
    let opts = BnbOptions { rel_gap: 1e-9, ..Default::default() };
    let (sol, _) = solve_milp(&sm.model, &opts)?;
    Ok((sol.status == Status::Optimal).then_some(sol.objective))
}

/// Exhaustive search over `levels^n` price vectors, `n` the number of
/// investor price variables.
pub fn bilevel_oracle(case: &Case, levels: &[f64]) -> Result<OracleResult, OracleError> {
    if levels.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    let n = build_investor_lp(case)?.num_prices();
    let total = (levels.len() as f64).powi(n as i32);
    if total > MAX_EVALUATIONS as f64 {
        return Err(OracleError::GridTooLarge(total.min(usize::MAX as f64) as usize));
    }
    let total = total as usize;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let x: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        if let Some(cost) = planner_cost_at(case, &x)? {
            if best.as_ref().map_or(true, |b| cost < b.1) {
                best = Some((x, cost));
            }
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < levels.len() {
                break;
            }
            *d = 0;
        }
    }
    let (prices, cost) = best.ok_or(OracleError::NoFeasiblePoint)?;
    Ok(OracleResult { prices, cost, evaluations: total })
}
