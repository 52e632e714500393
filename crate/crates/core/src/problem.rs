//! The seam between the problem-agnostic construction algorithms and the
//! concrete problem classes, plus the measurement interface.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::outcome::{RunKey, RunOutcome};
use crate::params::{Configuration, ParameterSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Tsp,
    Vrpspdtw,
    /// Enumerable score-matrix universe, see [`crate::matrix`].
    Matrix,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Tsp => "tsp",
            ProblemKind::Vrpspdtw => "vrpspdtw",
            ProblemKind::Matrix => "matrix",
        }
    }
}

impl core::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsp" => Ok(ProblemKind::Tsp),
            "vrpspdtw" => Ok(ProblemKind::Vrpspdtw),
            "matrix" => Ok(ProblemKind::Matrix),
            other => Err(Error::invalid(alloc::format!(
                "unknown problem kind {other:?}"
            ))),
        }
    }
}

/// A problem class with a parameterized solver, an instance mutator and a
/// per-run performance measure f(s, θ) where lower is better.
pub trait Problem {
    type Instance: Clone;

    fn kind(&self) -> ProblemKind;

    /// The solver's configuration space.
    fn space(&self) -> &ParameterSpace;

    fn fingerprint(&self, instance: &Self::Instance) -> Fingerprint;

    /// Returns a mutated, fully usable copy (e.g. with a fresh reference
    /// optimum where the measure needs one).
    fn mutate(&self, instance: &Self::Instance, seed: u64) -> Result<Self::Instance>;

    fn run(
        &self,
        instance: &Self::Instance,
        config: &Configuration,
        seed: u64,
    ) -> Result<RunOutcome>;

    /// f(s, θ) for one run.
    fn score(&self, instance: &Self::Instance, outcome: &RunOutcome) -> Result<f64>;

    /// The score a timed-out run receives.
    fn timeout_penalty(&self) -> f64;
}

/// One requested measurement.
#[derive(Debug)]
pub struct Job<'a, I> {
    pub config: &'a Configuration,
    pub instance: &'a I,
    pub instance_fp: Fingerprint,
    pub seed: u64,
}

impl<I> Clone for Job<'_, I> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<I> Copy for Job<'_, I> {}

impl<I> Job<'_, I> {
    pub fn key(&self) -> RunKey {
        RunKey {
            config: self.config.fingerprint(),
            instance: self.instance_fp,
            seed: self.seed,
        }
    }
}

/// Memoizing access to solver runs. All measurements made by the
/// construction algorithms go through one evaluator, so repeated
/// (configuration, instance, seed) triples are run once.
pub trait Evaluator {
    type Problem: Problem;

    fn problem(&self) -> &Self::Problem;

    fn is_cached(&self, key: &RunKey) -> bool;

    /// Outcomes in job order. Implementations may run uncached jobs
    /// concurrently but must return the same values as a sequential pass.
    fn outcomes(
        &self,
        jobs: &[Job<'_, <Self::Problem as Problem>::Instance>],
    ) -> Result<Vec<RunOutcome>>;

    fn scores(&self, jobs: &[Job<'_, <Self::Problem as Problem>::Instance>]) -> Result<Vec<f64>> {
        let outcomes = self.outcomes(jobs)?;
        jobs.iter()
            .zip(&outcomes)
            .map(|(job, o)| self.problem().score(job.instance, o))
            .collect()
    }

    /// Number of solver runs actually executed so far.
    fn fresh_runs(&self) -> u64;

    /// Seconds since the evaluator was created, when it has a clock.
    fn elapsed_seconds(&self) -> Option<f64> {
        None
    }
}

/// Single-threaded evaluator with an in-memory memo.
#[derive(Debug)]
pub struct MemoEvaluator<P> {
    problem: P,
    memo: RefCell<BTreeMap<RunKey, RunOutcome>>,
    fresh: Cell<u64>,
}

impl<P: Problem> MemoEvaluator<P> {
    pub fn new(problem: P) -> Self {
        MemoEvaluator {
            problem,
            memo: RefCell::new(BTreeMap::new()),
            fresh: Cell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.memo.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.borrow().is_empty()
    }

    /// Re-runs a job and checks it against the memoized outcome.
    pub fn verify(&self, job: &Job<'_, P::Instance>) -> Result<()> {
        let fresh = self.problem.run(job.instance, job.config, job.seed)?;
        match self.memo.borrow().get(&job.key()) {
            Some(old) if !old.bit_eq(&fresh) => Err(Error::CacheConflict {
                config: job.config.fingerprint(),
                instance: job.instance_fp,
                seed: job.seed,
            }),
            _ => Ok(()),
        }
    }
}

impl<P: Problem> Evaluator for MemoEvaluator<P> {
    type Problem = P;

    fn problem(&self) -> &P {
        &self.problem
    }

    fn is_cached(&self, key: &RunKey) -> bool {
        self.memo.borrow().contains_key(key)
    }

    fn outcomes(&self, jobs: &[Job<'_, P::Instance>]) -> Result<Vec<RunOutcome>> {
        let mut out = Vec::with_capacity(jobs.len());
        for job in jobs {
            let key = job.key();
            let hit = self.memo.borrow().get(&key).cloned();
            let outcome = match hit {
                Some(o) => o,
                None => {
                    let o = self.problem.run(job.instance, job.config, job.seed)?;
                    self.fresh.set(self.fresh.get() + 1);
                    self.memo.borrow_mut().insert(key, o.clone());
                    o
                }
            };
            out.push(outcome);
        }
        Ok(out)
    }

    fn fresh_runs(&self) -> u64 {
        self.fresh.get()
    }
}
