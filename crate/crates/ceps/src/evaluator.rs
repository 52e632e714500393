use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use ceps_core::clock::Clock;
use ceps_core::{Evaluator, Job, Problem, RunKey, RunOutcome};
use rayon::prelude::*;

use crate::cache::RunCache;
use crate::error::{Error, Result};

/// Environment variable capping the number of concurrent solver runs.
pub const WORKERS_ENV: &str = "CEPS_WORKERS";

/// `CEPS_WORKERS` if set to a positive integer, else the logical core count.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Seconds since creation.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        WallClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Evaluator backed by a shared [`RunCache`] that runs each batch's
/// uncached jobs on a worker pool. Results do not depend on the number of
/// workers or on completion order.
pub struct CachedEvaluator<P> {
    problem: P,
    cache: Arc<RunCache>,
    pool: rayon::ThreadPool,
    fresh: AtomicU64,
    started: Instant,
}

impl<P> std::fmt::Debug for CachedEvaluator<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CachedEvaluator")
            .field("workers", &self.pool.current_num_threads())
            .field("cached", &self.cache.len())
            .field("fresh", &self.fresh.load(Ordering::Relaxed))
            .finish()
    }
}

impl<P: Problem + Sync> CachedEvaluator<P>
where
    P::Instance: Sync,
{
    pub fn new(problem: P, cache: Arc<RunCache>, workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
        Ok(CachedEvaluator {
            problem,
            cache,
            pool,
            fresh: AtomicU64::new(0),
            started: Instant::now(),
        })
    }

    pub fn cache(&self) -> &Arc<RunCache> {
        &self.cache
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Re-runs every job and checks the outcome against the cache.
    pub fn verify(&self, jobs: &[Job<'_, P::Instance>]) -> Result<()> {
        let fresh: Vec<ceps_core::Result<RunOutcome>> = self.pool.install(|| {
            jobs.par_iter()
                .map(|j| self.problem.run(j.instance, j.config, j.seed))
                .collect()
        });
        for (job, outcome) in jobs.iter().zip(fresh) {
            self.cache.insert(job.key(), outcome?)?;
        }
        Ok(())
    }
}

impl<P: Problem + Sync> Evaluator for CachedEvaluator<P>
where
    P::Instance: Sync,
{
    type Problem = P;

    fn problem(&self) -> &P {
        &self.problem
    }

    fn is_cached(&self, key: &RunKey) -> bool {
        self.cache.contains(key)
    }

    fn outcomes(&self, jobs: &[Job<'_, P::Instance>]) -> ceps_core::Result<Vec<RunOutcome>> {
        let mut seen = BTreeSet::new();
        let pending: Vec<&Job<'_, P::Instance>> = jobs
            .iter()
            .filter(|j| {
                let key = j.key();
                !self.cache.contains(&key) && seen.insert(key)
            })
            .collect();
        let results: Vec<ceps_core::Result<RunOutcome>> = self.pool.install(|| {
            pending
                .par_iter()
                .map(|j| self.problem.run(j.instance, j.config, j.seed))
                .collect()
        });
        for (job, outcome) in pending.iter().zip(results) {
            if self.cache.insert(job.key(), outcome?).map_err(into_core)? {
                self.fresh.fetch_add(1, Ordering::Relaxed);
            }
        }
        jobs.iter()
            .map(|j| {
                self.cache.get(&j.key()).ok_or_else(|| {
                    ceps_core::Error::InvalidInput("run vanished from the cache".into())
                })
            })
            .collect()
    }

    fn fresh_runs(&self) -> u64 {
        self.fresh.load(Ordering::Relaxed)
    }

    fn elapsed_seconds(&self) -> Option<f64> {
        Some(self.started.elapsed().as_secs_f64())
    }
}

/// The core evaluator interface only carries core errors; file problems
/// while appending to the cache are reported as invalid input.
fn into_core(e: Error) -> ceps_core::Error {
    match e {
        Error::Core(c) => c,
        other => ceps_core::Error::InvalidInput(other.to_string()),
    }
}
