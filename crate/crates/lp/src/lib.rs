//! Algebraic LP/MILP modeling with a sparse bounded-variable simplex,
//! best-bound branch-and-bound and an external-solver bridge based on a
//! plain-text LP file and solution document.

pub mod bnb;
pub mod error;
pub mod external;
pub mod lpfile;
pub mod lu;
pub mod model;
pub mod simplex;
pub mod solution;
pub mod sparse;
pub mod standard;

pub use bnb::{solve_lp, solve_lp_with, solve_milp, solve_milp_with_heuristic, BnbOptions, BnbStats, Heuristic};
pub use error::{ModelError, ParseError, SolveError};
pub use external::solve_external;
pub use lpfile::{emit_model_file, parse_model_file};
pub use model::{ConId, Constraint, LinExpr, Model, Sense, VarId, VarKind, Variable};
pub use simplex::{simplex, simplex_with, SimplexOptions, SimplexResult};
pub use solution::{parse_solution_document, write_solution_document, Solution, SolutionDocument, Status};
pub use sparse::CscMatrix;
pub use standard::{relaxed_standard_form, standard_form, ColumnOrigin, StandardLp};
