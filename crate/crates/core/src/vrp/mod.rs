//! Vehicle routing with simultaneous pickup-delivery and time windows:
//! the instance model, route scheduling and the feasibility checker, the
//! PANC measure, the instance mutator and a ruin-and-recreate solver.

mod instance;
mod mutate;
mod problem;
mod solver;

pub use instance::{
    evaluate_solution, panc, schedule_route, Customer, Depot, Evaluation, Fleet, RouteSchedule,
    RouteViolation, Violation, VrpInstance, VrpSolution, PANC_PENALTY,
};
pub use mutate::mutate_vrp;
pub use problem::{SyntheticPopulation, VrpProblem};
pub use solver::{baseline_solve, solve_with_solution, vrp_space, Insertion, VrpParams};
