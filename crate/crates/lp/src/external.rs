//! External solver backend.
//!
//! The model is written to `workdir/model.lp` and the command is run inside
//! `workdir` as `command... model.lp solution.txt`. The command must write a
//! solution document to `workdir/solution.txt`.

use std::path::Path;
use std::process::Command;

use crate::error::SolveError;
use crate::lpfile::emit_model_file;
use crate::model::Model;
use crate::solution::{parse_solution_document, Solution, Status};

pub const MODEL_FILE: &str = "model.lp";
pub const SOLUTION_FILE: &str = "solution.txt";

/// Feasibility tolerance applied to points returned by an external solver.
const CHECK_TOL: f64 = 1e-6;

/// Solves `model` with an external executable. `command` is split on
/// whitespace into program and leading arguments.
pub fn solve_external(model: &Model, command: &str, workdir: &Path) -> Result<Solution, SolveError> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| SolveError::Launch {
        command: command.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
    })?;
    std::fs::create_dir_all(workdir)?;
    std::fs::write(workdir.join(MODEL_FILE), emit_model_file(model))?;
    let solution_path = workdir.join(SOLUTION_FILE);
    if solution_path.exists() {
        std::fs::remove_file(&solution_path)?;
    }
    let output = Command::new(program)
        .args(parts)
        .arg(MODEL_FILE)
        .arg(SOLUTION_FILE)
        .current_dir(workdir)
        .output()
        .map_err(|source| SolveError::Launch { command: command.to_string(), source })?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(SolveError::ExternalFailed(format!("{}: {}", output.status, stderr.trim())));
    }
    let text = std::fs::read_to_string(&solution_path)
        .map_err(|e| SolveError::SolutionDocument(format!("{}: {e}", solution_path.display())))?;
    let sol = parse_solution_document(&text)?.into_solution(model)?;
    check_claim(model, &sol)?;
    Ok(sol)
}

/// Rejects documents whose status is contradicted by the reported point.
fn check_claim(model: &Model, sol: &Solution) -> Result<(), SolveError> {
    match sol.status {
        Status::Optimal => {
            if !sol.has_point() {
                return Err(SolveError::StatusMismatch("optimal status without a primal point".into()));
            }
            let viol = model.max_violation(&sol.primal);
            if viol > CHECK_TOL {
                return Err(SolveError::StatusMismatch(format!("optimal point violates the model by {viol:.3e}")));
            }
            let obj = model.objective().evaluate(&sol.primal);
            if (obj - sol.objective).abs() > CHECK_TOL * sol.objective.abs().max(1.0) {
                return Err(SolveError::StatusMismatch(format!(
                    "reported objective {} but the point evaluates to {obj}",
                    sol.objective
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
