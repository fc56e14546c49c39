//! LP and MILP drivers: a single simplex solve for continuous models and a
//! best-bound branch-and-bound over the binaries otherwise.
//!
//! Nodes re-solve their relaxation with the dual simplex starting from the
//! parent's optimal basis. Branching picks the most fractional binary (ties
//! to the lowest variable id) and open nodes are explored in order of their
//! bound (ties to the oldest node), so runs are fully deterministic.
//! Reported duals come from a final LP with every binary fixed at its
//! incumbent value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::{ModelError, SolveError};
use crate::model::{Model, VarKind};
use crate::simplex::{BasisSnapshot, Engine, SimplexOptions};
use crate::solution::{Solution, Status};
use crate::standard::{relaxed_standard_form, StandardLp};

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Stop once `(incumbent − bound) / max(1, |incumbent|)` falls to this.
    pub rel_gap: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Call the heuristic every this many nodes (always at the root).
    pub heuristic_every: usize,
    /// Simplex iteration budget of each heuristic fixing.
    pub heuristic_iterations: usize,
    /// Branching priority per model variable; fractional binaries of the
    /// highest priority are branched on first. Missing entries count as 0.
    pub priority: Vec<i32>,
    pub simplex: SimplexOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            rel_gap: 1e-6,
            int_tol: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            heuristic_every: 25,
            heuristic_iterations: 20_000,
            priority: Vec::new(),
            simplex: SimplexOptions::default(),
        }
    }
}

/// Primal heuristic: receives the model and a relaxation point and returns
/// candidate points whose binary values are each tried as a complete fixing.
pub type Heuristic<'a> = dyn FnMut(&Model, &[f64]) -> Vec<Vec<f64>> + 'a;

/// Search statistics of a branch-and-bound run.
#[derive(Debug, Clone, Default)]
pub struct BnbStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Global lower bound after each processed node; nondecreasing.
    pub bound_history: Vec<f64>,
    pub incumbent_updates: usize,
    pub elapsed: Duration,
}

/// Solves a continuous model. Duals are reported per constraint.
pub fn solve_lp(model: &Model) -> Result<Solution, SolveError> {
    solve_lp_with(model, &SimplexOptions::default())
}

pub fn solve_lp_with(model: &Model, opts: &SimplexOptions) -> Result<Solution, SolveError> {
    if let Some(v) = model.variables().iter().find(|v| v.kind == VarKind::Binary) {
        return Err(ModelError::BinaryInStandardForm(v.name.clone()).into());
    }
    let lp = relaxed_standard_form(model);
    let mut engine = Engine::new(&lp, opts.clone())?;
    engine.solve_from_scratch()?;
    Ok(lp_solution(&lp, &mut engine, 0))
}

fn lp_solution(lp: &StandardLp, engine: &mut Engine, nodes: usize) -> Solution {
    let r = engine.result(lp);
    let has_point = matches!(r.status, Status::Optimal | Status::LimitReached);
    Solution {
        status: r.status,
        objective: r.objective,
        bound: r.objective,
        primal: if has_point { lp.restrict_point(&r.primal) } else { Vec::new() },
        dual: if r.status == Status::Optimal { r.dual } else { Vec::new() },
        nodes,
    }
}

/// Solves a mixed-binary model by branch-and-bound.
pub fn solve_milp(model: &Model, opts: &BnbOptions) -> Result<(Solution, BnbStats), SolveError> {
    solve_milp_with_heuristic(model, opts, None)
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
    basis: Rc<BasisSnapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest id
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Search {
    lp: StandardLp,
    engine: Engine,
    opts: BnbOptions,
    /// Standard-form columns of the binaries with their original bounds.
    binaries: Vec<(usize, f64, f64)>,
    /// Branching priority of each entry of `binaries`.
    priority: Vec<i32>,
    incumbent: Option<(f64, Vec<f64>)>,
    stats: BnbStats,
    deadline: Option<Instant>,
}

impl Search {
    fn apply_fixings(&mut self, fixings: &[(usize, f64)]) {
        for &(col, lb, ub) in &self.binaries {
            self.engine.set_bounds(col, lb, ub);
        }
        for &(col, v) in fixings {
            self.engine.set_bounds(col, v, v);
        }
    }

    fn relaxation_value(&self) -> f64 {
        self.engine.objective(&self.lp)
    }

    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.opts.rel_gap * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    /// Fixes every binary at the rounded value in `point` and solves the LP;
    /// records a new incumbent when it improves.
    fn try_fixing(&mut self, point: &[f64], from: &BasisSnapshot) -> Result<bool, SolveError> {
        let fixings: Vec<(usize, f64)> = self
            .binaries
            .iter()
            .map(|&(col, lb, ub)| (col, point[col].round().clamp(lb, ub)))
            .collect();
        self.apply_fixings(&fixings);
        let limit = self.engine.max_iterations();
        self.engine.set_max_iterations(self.engine.iterations + self.opts.heuristic_iterations);
        let status = self.engine.solve_from(from);
        self.engine.set_max_iterations(limit);
        let status = status?;
        let improved = status == Status::Optimal && self.offer_incumbent();
        Ok(improved)
    }

    fn offer_incumbent(&mut self) -> bool {
        let obj = self.relaxation_value();
        if self.incumbent.as_ref().map_or(true, |(best, _)| obj < *best) {
            let x = self.engine.primal_values();
            self.incumbent = Some((obj, x));
            self.stats.incumbent_updates += 1;
            log::debug!("incumbent {obj:.6e} after {} nodes", self.stats.nodes);
            true
        } else {
            false
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, i32, f64)> = None;
        for (&(col, _, _), &prio) in self.binaries.iter().zip(&self.priority) {
            let f = (x[col] - x[col].floor()).min(x[col].ceil() - x[col]);
            if f <= self.opts.int_tol {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, bp, bf)) => prio > bp || (prio == bp && f > bf + 1e-12),
            };
            if better {
                best = Some((col, prio, f));
            }
        }
        best.map(|b| b.0)
    }

    fn out_of_time(&self) -> bool {
        self.deadline.map_or(false, |d| Instant::now() >= d)
    }
}

/// Branch-and-bound with an optional primal heuristic.
pub fn solve_milp_with_heuristic(
    model: &Model,
    opts: &BnbOptions,
    mut heuristic: Option<&mut Heuristic<'_>>,
) -> Result<(Solution, BnbStats), SolveError> {
    let start = Instant::now();
    let deadline = opts.time_limit.map(|t| start + t);
    let lp = relaxed_standard_form(model);
    let mut simplex_opts = opts.simplex.clone();
    simplex_opts.deadline = deadline;
    let engine = Engine::new(&lp, simplex_opts)?;
    let (binaries, priority) = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, v)| ((lp.var_col[i], v.lb, v.ub), opts.priority.get(i).copied().unwrap_or(0)))
        .unzip();
    let mut s = Search {
        lp,
        engine,
        opts: opts.clone(),
        binaries,
        priority,
        incumbent: None,
        stats: BnbStats::default(),
        deadline,
    };

    let root_status = s.engine.solve_from_scratch()?;
    log::info!(
        "root relaxation {root_status:?}: {} rows, {} columns, {} iterations, {:.1}s",
        s.lp.w.len(),
        s.lp.c.len(),
        s.engine.iterations,
        start.elapsed().as_secs_f64()
    );
    match root_status {
        Status::Infeasible | Status::Unbounded => {
            s.stats.elapsed = start.elapsed();
            s.stats.lp_iterations = s.engine.iterations;
            let obj = if root_status == Status::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY };
            let sol = Solution { status: root_status, objective: obj, bound: obj, primal: Vec::new(), dual: Vec::new(), nodes: 1 };
            return Ok((sol, s.stats));
        }
        Status::LimitReached => {
            s.stats.elapsed = start.elapsed();
            let sol = Solution {
                status: Status::LimitReached,
                objective: f64::INFINITY,
                bound: f64::NEG_INFINITY,
                primal: Vec::new(),
                dual: Vec::new(),
                nodes: 1,
            };
            return Ok((sol, s.stats));
        }
        Status::Optimal => {}
    }
    let root_basis = Rc::new(s.engine.snapshot());
    let root_bound = s.relaxation_value();
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: root_bound, id: 0, fixings: Vec::new(), basis: root_basis.clone() });
    let mut next_id = 1;
    let mut global_bound = root_bound;
    let mut hit_limit = false;

    // smallest bound among nodes discarded within the gap tolerance
    let mut pruned_bound = f64::INFINITY;
    while let Some(node) = heap.pop() {
        if node.bound >= s.prune_threshold() {
            // every remaining node is at least as bad
            heap.push(node);
            break;
        }
        if s.stats.nodes >= opts.node_limit || s.out_of_time() {
            heap.push(node);
            hit_limit = true;
            break;
        }
        s.stats.nodes += 1;
        let status = if node.id == 0 {
            Status::Optimal
        } else {
            s.apply_fixings(&node.fixings);
            s.engine.solve_from(&node.basis)?
        };
        match status {
            Status::Infeasible => {}
            Status::Unbounded => {
                return Err(SolveError::Numerical("unbounded node relaxation below a bounded root".into()));
            }
            Status::LimitReached => {
                heap.push(node);
                hit_limit = true;
                break;
            }
            Status::Optimal => {
                let value = s.relaxation_value().max(node.bound);
                if value >= s.prune_threshold() {
                    pruned_bound = pruned_bound.min(value);
                } else {
                    let x = s.engine.primal_values();
                    let basis = Rc::new(s.engine.snapshot());
                    match s.most_fractional(&x) {
                        None => {
                            s.offer_incumbent();
                        }
                        Some(col) => {
                            let run_heuristic = node.id == 0 || s.stats.nodes % opts.heuristic_every.max(1) == 0;
                            if run_heuristic {
                                if let Some(h) = heuristic.as_mut() {
                                    let model_point = s.lp.restrict_point(&x);
                                    for p in h(model, &model_point) {
                                        let mut full = x.clone();
                                        for (i, &col) in s.lp.var_col.iter().enumerate() {
                                            full[col] = p[i];
                                        }
                                        let it = s.engine.iterations;
                                        let ok = s.try_fixing(&full, &basis)?;
                                        log::debug!("heuristic candidate: improved {ok}, {} iterations", s.engine.iterations - it);
                                    }
                                }
                            }
                            for v in [0.0, 1.0] {
                                let mut fixings = node.fixings.clone();
                                fixings.push((col, v));
                                heap.push(Node { bound: value, id: next_id, fixings, basis: basis.clone() });
                                next_id += 1;
                            }
                        }
                    }
                }
            }
        }
        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let inc = s.incumbent.as_ref().map_or(f64::INFINITY, |i| i.0);
        global_bound = global_bound.max(open.min(inc).min(pruned_bound));
        s.stats.bound_history.push(global_bound);
        if s.stats.nodes % 100 == 0 {
            log::info!(
                "nodes {} open {} bound {global_bound:.6e} incumbent {inc:.6e} iterations {} {:.1}s",
                s.stats.nodes,
                heap.len(),
                s.engine.iterations,
                start.elapsed().as_secs_f64()
            );
        }
    }

    let incumbent_value = s.incumbent.as_ref().map_or(f64::INFINITY, |i| i.0);
    let bound = heap.peek().map_or(f64::INFINITY, |n| n.bound).min(incumbent_value).min(pruned_bound);
    s.stats.lp_iterations = s.engine.iterations;

    let Some((_, inc_x)) = s.incumbent.clone() else {
        s.stats.elapsed = start.elapsed();
        let status = if hit_limit { Status::LimitReached } else { Status::Infeasible };
        let sol = Solution { status, objective: f64::INFINITY, bound, primal: Vec::new(), dual: Vec::new(), nodes: s.stats.nodes };
        return Ok((sol, s.stats));
    };
    // polish: the LP with binaries fixed gives exact duals for the incumbent
    let fixings: Vec<(usize, f64)> = s.binaries.iter().map(|&(col, _, _)| (col, inc_x[col].round())).collect();
    s.apply_fixings(&fixings);
    s.engine.set_deadline(None);
    let polished = s.engine.solve_from(&root_basis)?;
    let (objective, primal, dual) = if polished == Status::Optimal {
        let r = s.engine.result(&s.lp);
        (r.objective, s.lp.restrict_point(&r.primal), r.dual)
    } else {
        let obj = s.lp.objective_value(&inc_x);
        (obj, s.lp.restrict_point(&inc_x), Vec::new())
    };
    let mut primal = primal;
    for (i, v) in model.variables().iter().enumerate() {
        if v.kind == VarKind::Binary {
            primal[i] = primal[i].round();
        }
    }
    s.stats.lp_iterations = s.engine.iterations;
    s.stats.elapsed = start.elapsed();
    let bound = bound.min(objective);
    let sol = Solution {
        status: if hit_limit && (objective - bound) / objective.abs().max(1.0) > opts.rel_gap {
            Status::LimitReached
        } else {
            Status::Optimal
        },
        objective,
        bound,
        primal,
        dual,
        nodes: s.stats.nodes,
    };
    Ok((sol, s.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense};

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c ≤ 4
        let mut m = Model::new();
        let a = m.binary("a").unwrap();
        let b = m.binary("b").unwrap();
        let c = m.binary("c").unwrap();
        m.add_constraint(LinExpr::from_terms(vec![(a, 2.0), (b, 3.0), (c, 1.0)]), Sense::Le, 4.0, "cap").unwrap();
        m.set_objective(LinExpr::from_terms(vec![(a, -5.0), (b, -4.0), (c, -3.0)])).unwrap();
        let (sol, stats) = solve_milp(&m, &BnbOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective + 8.0).abs() < 1e-9);
        assert_eq!(sol.primal, vec![1.0, 0.0, 1.0]);
        assert!(stats.bound_history.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn infeasible_milp() {
        let mut m = Model::new();
        let a = m.binary("a").unwrap();
        let b = m.binary("b").unwrap();
        m.add_constraint(LinExpr::from(a) + LinExpr::from(b), Sense::Eq, 1.5, "half").unwrap();
        let (sol, _) = solve_milp(&m, &BnbOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
    }

    #[test]
    fn lp_rejects_binaries() {
        let mut m = Model::new();
        m.binary("z").unwrap();
        assert!(solve_lp(&m).is_err());
    }
}
