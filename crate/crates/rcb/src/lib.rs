//! Composite battery dispatch toolkit.
//!
//! A fleet of `N` identical storage elements is scheduled as one composite
//! battery. The realizable composite model keeps the scheduling problem
//! linear — simultaneous charging and discharging included — while
//! guaranteeing that the priority stack controller can disaggregate every
//! feasible composite schedule into an admissible per-element dispatch.
//! Relaxed and MILP baselines, an exhaustive oracle, process-level solver
//! integration, and a scenario harness round out the pipeline.

pub mod brute;
pub mod formulations;
pub mod lp_format;
pub mod mps_format;
pub mod oracle;
pub mod problem;
pub mod psc;
pub mod region;
pub mod scenario;
pub mod signals;
pub mod sim;
pub mod solver;
pub mod types;

pub use formulations::{
    build_milp_equal, build_milp_unequal, build_model, build_rcb, build_relaxed, epsilon,
    BuiltModel, EpsilonBuffer, FormulationError, ModelKind, Objective,
};
pub use problem::{Cmp, OptProblem, Sense, Solution, SolveStatus, VarId, VarKind};
pub use psc::{activation_counts, disaggregate_schedule, disaggregate_step, ActivationCounts};
pub use region::{feasible_region_samples, FeasibleRegion};
pub use sim::{
    check_admissibility, realize_net_power, simulate_fleet, soe_spread, step_soe, SoeSpreadTrace,
};
pub use solver::{solve, solve_external, write_problem_file, FileFormat, SolveError, SolverConfig};
pub use types::{
    build_time_grid, validate_fleet, AdmissibilityReport, CompositeSchedule, CoreError,
    ElementDispatch, ElementParams, FleetParams, TimeGrid,
};
