//! A fully enumerable problem: a fixed universe of instances and a finite
//! set of candidate solvers with a precomputed score table. Used to check
//! the construction algorithms against exhaustive enumeration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{ensure, Result};
use crate::fingerprint::Fingerprint;
use crate::outcome::RunOutcome;
use crate::params::{Configuration, Domain, Parameter, ParameterSpace, Value};
use crate::problem::{Problem, ProblemKind};
use crate::rng::rng_from;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatrixInstance(pub usize);

/// `scores[instance][solver]`; seeds do not matter.
#[derive(Clone, Debug)]
pub struct MatrixProblem {
    scores: Vec<Vec<f64>>,
    space: ParameterSpace,
    penalty: f64,
}

impl MatrixProblem {
    pub fn new(scores: Vec<Vec<f64>>, penalty: f64) -> Result<Self> {
        ensure!(!scores.is_empty(), "score matrix has no instances");
        let width = scores[0].len();
        ensure!(width >= 1, "score matrix has no solvers");
        ensure!(
            scores.iter().all(|r| r.len() == width),
            "ragged score matrix"
        );
        let names: Vec<String> = (0..width).map(|j| format!("c{j}")).collect();
        let space = ParameterSpace::new(
            "matrix",
            alloc::vec![Parameter::new(
                "solver",
                Domain::Categorical(names.clone()),
                Value::Cat(names[0].clone()),
            )],
        )?;
        Ok(MatrixProblem {
            scores,
            space,
            penalty,
        })
    }

    /// Uniform random scores in `[0, penalty)` with roughly a quarter of
    /// the cells set to the penalty.
    pub fn random(instances: usize, solvers: usize, penalty: f64, seed: u64) -> Result<Self> {
        let mut rng = rng_from(seed);
        let scores = (0..instances)
            .map(|_| {
                (0..solvers)
                    .map(|_| {
                        if rng.random_bool(0.25) {
                            penalty
                        } else {
                            // integers keep the sums exact in tests
                            rng.random_range(1..(penalty as i64)) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        MatrixProblem::new(scores, penalty)
    }

    pub fn instance_count(&self) -> usize {
        self.scores.len()
    }

    pub fn solver_count(&self) -> usize {
        self.scores[0].len()
    }

    pub fn solver(&self, j: usize) -> Configuration {
        self.space
            .default_configuration()
            .with("solver", Value::Cat(format!("c{j}")))
    }

    pub fn solver_index(&self, config: &Configuration) -> Result<usize> {
        let name = config.cat("solver")?;
        let j: usize = name[1..]
            .parse()
            .map_err(|_| crate::Error::invalid(format!("bad solver name {name}")))?;
        ensure!(j < self.solver_count(), "solver {j} out of range");
        Ok(j)
    }

    pub fn score_of(&self, instance: usize, solver: usize) -> f64 {
        self.scores[instance][solver]
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }
}

impl Problem for MatrixProblem {
    type Instance = MatrixInstance;

    fn kind(&self) -> ProblemKind {
        ProblemKind::Matrix
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn fingerprint(&self, instance: &MatrixInstance) -> Fingerprint {
        Fingerprint::of(&format!("matrix-instance:{}", instance.0))
    }

    /// Jumps to a uniformly random instance of the universe.
    fn mutate(&self, _instance: &MatrixInstance, seed: u64) -> Result<MatrixInstance> {
        Ok(MatrixInstance(
            rng_from(seed).random_range(0..self.instance_count()),
        ))
    }

    fn run(
        &self,
        instance: &MatrixInstance,
        config: &Configuration,
        seed: u64,
    ) -> Result<RunOutcome> {
        ensure!(
            instance.0 < self.instance_count(),
            "instance {} out of range",
            instance.0
        );
        let s = self.scores[instance.0][self.solver_index(config)?];
        Ok(RunOutcome::success(s, s, seed, f64::MAX))
    }

    fn score(&self, _instance: &MatrixInstance, outcome: &RunOutcome) -> Result<f64> {
        Ok(outcome.quality.unwrap_or(self.penalty))
    }

    fn timeout_penalty(&self) -> f64 {
        self.penalty
    }
}
