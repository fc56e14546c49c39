//! Non-wires alternative planning: a radial three-phase feeder, a planner
//! that buys storage, upgrades and DER exports, and DER investors who answer
//! the planner's price signal. The two-level problem is solved as one MILP
//! through the investors' KKT conditions.

pub mod bilevel;
pub mod investor;
pub mod network;
pub mod oracle;
pub mod planner;
pub mod powerflow;
pub mod scenario;

pub use network::{load_case, Case, CaseError};
pub use scenario::{build_scenario, solve_scenario, Backend, ScenarioKind, ScenarioOutcome, SolverConfig};
