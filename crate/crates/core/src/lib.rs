//! Parallel algorithm portfolio construction by co-evolving a population of
//! solver configurations against a population of problem instances.
//!
//! This crate holds every algorithmic piece and stays `no_std` (it needs
//! `alloc`): parameter spaces and configurations, portfolio scoring, the
//! built-in TSP and VRPSPDTW solvers with their instance mutators, the TSP
//! instance generators, a successive-halving configurator and the
//! co-evolution loop together with its baselines.
//!
//! Anything that touches the operating system (files, threads, wall clocks)
//! lives in the companion `ceps` crate and is injected through the
//! [`Evaluator`](problem::Evaluator) and [`Clock`](clock::Clock) traits.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod ceps;
pub mod clock;
pub mod configurator;
pub mod error;
pub mod fingerprint;
pub mod instgen;
pub mod matrix;
pub mod outcome;
pub mod params;
pub mod portfolio;
pub mod problem;
pub mod rng;
pub mod tsp;
pub mod vrp;

pub use error::{Error, Result};
pub use fingerprint::Fingerprint;
pub use outcome::{RunKey, RunOutcome, RunStatus};
pub use params::{Configuration, Domain, ParamKind, Parameter, ParameterSpace, Value};
pub use portfolio::{portfolio_score, set_score, Portfolio};
pub use problem::{Evaluator, Job, MemoEvaluator, Problem, ProblemKind};
