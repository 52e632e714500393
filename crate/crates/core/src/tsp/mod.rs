//! Symmetric Euclidean TSP: instances, the EUC_2D metric, an exact
//! small-instance optimum, a parameterized iterated local search and the
//! PAR-10 runtime measure.

mod held_karp;
mod instance;
mod problem;
mod solver;

pub use held_karp::{held_karp_optimum, HELD_KARP_MAX_CITIES};
pub use instance::{
    nint_distance, tour_length, Point, Provenance, ReferenceOptimum, Tour, TspInstance,
};
pub use problem::{par10, TspProblem, PAR10_FACTOR};
pub use solver::{
    search, solve, tsp_space, Acceptance, Construction, Perturbation, SearchResult, TspParams,
};
