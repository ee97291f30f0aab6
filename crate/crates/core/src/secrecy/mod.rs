//! Secrecy capacities and relay-weight optimization.

mod plan;
mod report;
mod solver;

pub use plan::{plans_to_csv, read_plans, select_relays, select_relays_with, sidecar_path, write_plans, RelayPlan};
pub use report::{secrecy_rate, Capacity, SecrecyReport};
pub use solver::{solve_inner_convex, sparsify_weights, InnerSolution, SolverConfig, Sparsified};
