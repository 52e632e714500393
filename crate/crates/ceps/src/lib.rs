//! Everything around the construction algorithms of `ceps-core` that needs
//! an operating system: the persistent run cache, a worker-pool evaluator,
//! instance files, the experiment harness, reports and the `ceps` CLI.

pub mod cache;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod tsplib;

pub use cache::RunCache;
pub use error::{Error, Result};
pub use evaluator::CachedEvaluator;
