//! Solver results and the solution interchange document.
//!
//! ```text
//! status optimal
//! objective 1.5000000000000000e0
//! primal
//! x 1.0000000000000000e0
//! dual
//! c1 5.0000000000000000e-1
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::SolveError;
use crate::model::{ConId, Model, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// A node, iteration or time limit stopped the search; an incumbent may
    /// still be present.
    LimitReached,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::LimitReached => "limit",
        })
    }
}

impl FromStr for Status {
    type Err = SolveError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(Status::Optimal),
            "infeasible" => Ok(Status::Infeasible),
            "unbounded" => Ok(Status::Unbounded),
            "limit" | "limit_reached" | "time_limit" | "node_limit" => Ok(Status::LimitReached),
            other => Err(SolveError::SolutionDocument(format!("unknown status `{other}`"))),
        }
    }
}

/// Solution of a [`Model`], indexed by variable and constraint ids.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    /// Best proven lower bound (equal to `objective` for LPs solved to optimality).
    pub bound: f64,
    pub primal: Vec<f64>,
    /// Constraint duals; empty when the solver did not produce any.
    pub dual: Vec<f64>,
    pub nodes: usize,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual_of(&self, c: ConId) -> Option<f64> {
        self.dual.get(c.0).copied()
    }

    /// Relative gap `(objective − bound) / max(1, |objective|)`.
    pub fn gap(&self) -> f64 {
        if !self.objective.is_finite() {
            return f64::INFINITY;
        }
        ((self.objective - self.bound) / self.objective.abs().max(1.0)).max(0.0)
    }

    pub fn has_point(&self) -> bool {
        !self.primal.is_empty()
    }
}

/// Renders a solution document with names taken from `model`.
pub fn write_solution_document(model: &Model, sol: &Solution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status {}", sol.status);
    let _ = writeln!(out, "objective {:.16e}", sol.objective);
    out.push_str("primal\n");
    for (v, x) in model.variables().iter().zip(&sol.primal) {
        let _ = writeln!(out, "{} {:.16e}", v.name, x);
    }
    out.push_str("dual\n");
    for (c, y) in model.constraints().iter().zip(&sol.dual) {
        let _ = writeln!(out, "{} {:.16e}", c.name, y);
    }
    out.push_str("end\n");
    out
}

/// Name-keyed contents of a solution document.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDocument {
    pub status: Status,
    pub objective: f64,
    pub primal: BTreeMap<String, f64>,
    pub dual: BTreeMap<String, f64>,
}

pub fn parse_solution_document(text: &str) -> Result<SolutionDocument, SolveError> {
    let bad = |m: String| SolveError::SolutionDocument(m);
    let mut status = None;
    let mut objective = None;
    let mut primal = BTreeMap::new();
    let mut dual = BTreeMap::new();
    #[derive(PartialEq)]
    enum Part {
        Head,
        Primal,
        Dual,
        Done,
    }
    let mut part = Part::Head;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap();
        let val = toks.next();
        match (key, val) {
            ("primal", None) => part = Part::Primal,
            ("dual", None) => part = Part::Dual,
            ("end", None) => part = Part::Done,
            ("status", Some(s)) if part == Part::Head => status = Some(s.parse::<Status>()?),
            ("objective", Some(s)) if part == Part::Head => {
                objective = Some(s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)))?)
            }
            (name, Some(s)) if part == Part::Primal || part == Part::Dual => {
                let x = s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
                if part == Part::Primal {
                    primal.insert(name.to_string(), x);
                } else {
                    dual.insert(name.to_string(), x);
                }
            }
            _ => return Err(bad(format!("line {}: unexpected `{line}`", i + 1))),
        }
    }
    let status = status.ok_or_else(|| bad("missing status".into()))?;
    let objective = match (objective, status) {
        (Some(o), _) => o,
        (None, Status::Infeasible) => f64::INFINITY,
        (None, Status::Unbounded) => f64::NEG_INFINITY,
        (None, _) => return Err(bad("missing objective".into())),
    };
    Ok(SolutionDocument { status, objective, primal, dual })
}

impl SolutionDocument {
    /// Maps the named values onto `model`'s ids. Every variable must be
    /// present when the document carries a point.
    pub fn into_solution(self, model: &Model) -> Result<Solution, SolveError> {
        let mut primal = Vec::new();
        if !self.primal.is_empty() {
            primal.reserve(model.num_vars());
            for v in model.variables() {
                let x = self
                    .primal
                    .get(&v.name)
                    .ok_or_else(|| SolveError::SolutionDocument(format!("no value for `{}`", v.name)))?;
                primal.push(*x);
            }
        }
        let dual = if self.dual.is_empty() {
            Vec::new()
        } else {
            model.constraints().iter().map(|c| self.dual.get(&c.name).copied().unwrap_or(0.0)).collect()
        };
        Ok(Solution {
            status: self.status,
            objective: self.objective,
            bound: self.objective,
            primal,
            dual,
            nodes: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense};

    #[test]
    fn document_round_trip() {
        let mut m = Model::new();
        let x = m.continuous("x", 0.0, 2.0).unwrap();
        m.add_constraint(LinExpr::from(x), Sense::Le, 1.0, "cap").unwrap();
        let sol = Solution {
            status: Status::Optimal,
            objective: -1.0,
            bound: -1.0,
            primal: vec![1.0],
            dual: vec![-1.0],
            nodes: 0,
        };
        let text = write_solution_document(&m, &sol);
        let back = parse_solution_document(&text).unwrap().into_solution(&m).unwrap();
        assert_eq!(back.primal, vec![1.0]);
        assert_eq!(back.dual, vec![-1.0]);
        assert_eq!(back.status, Status::Optimal);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_solution_document("hello world\n").is_err());
        assert!(parse_solution_document("objective 1\n").is_err());
    }
}
