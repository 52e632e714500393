use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::TimeSource;
use crate::error::{ensure, Result};
use crate::fingerprint::Fingerprint;
use crate::outcome::RunOutcome;
use crate::params::{Configuration, ParameterSpace};
use crate::problem::{Problem, ProblemKind};
use crate::rng::{derive_seed, rng_from, tag};

use super::instance::{panc, Customer, Depot, Fleet, VrpInstance, PANC_PENALTY};
use super::mutate::mutate_vrp;
use super::solver::{baseline_solve, vrp_space};

/// VRPSPDTW with the ruin-and-recreate solver and PANC as the measure.
#[derive(Clone, Debug)]
pub struct VrpProblem {
    space: ParameterSpace,
    pub cutoff: f64,
    pub time: TimeSource,
}

impl VrpProblem {
    pub fn new(cutoff: f64) -> Result<Self> {
        ensure!(
            cutoff > 0.0 && cutoff.is_finite(),
            "cutoff must be positive, got {cutoff}"
        );
        Ok(VrpProblem {
            space: vrp_space(),
            cutoff,
            time: TimeSource::WorkUnits,
        })
    }

    pub fn with_time(mut self, time: TimeSource) -> Self {
        self.time = time;
        self
    }
}

impl Problem for VrpProblem {
    type Instance = VrpInstance;

    fn kind(&self) -> ProblemKind {
        ProblemKind::Vrpspdtw
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn fingerprint(&self, instance: &VrpInstance) -> Fingerprint {
        instance.fingerprint()
    }

    fn mutate(&self, instance: &VrpInstance, seed: u64) -> Result<VrpInstance> {
        let mut child = mutate_vrp(instance, seed)?;
        child.name = format!("{}-m{}", instance.name, seed % 100_000);
        Ok(child)
    }

    fn run(&self, instance: &VrpInstance, config: &Configuration, seed: u64) -> Result<RunOutcome> {
        baseline_solve(instance, config, seed, self.cutoff, &self.time)
    }

    fn score(&self, instance: &VrpInstance, outcome: &RunOutcome) -> Result<f64> {
        panc(instance, outcome)
    }

    fn timeout_penalty(&self) -> f64 {
        PANC_PENALTY
    }
}

/// A pooled customer population around one depot. Instances are drawn by
/// sampling customers from the pool without replacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPopulation {
    pub depot: Depot,
    pub capacity: f64,
    pub dispatch_cost: f64,
    pub unit_cost: f64,
    pub customers: Vec<Customer>,
}

impl SyntheticPopulation {
    /// Customers on a 100 x 100 square centred on the depot with a 1000-unit
    /// horizon. Windows are placed so that a direct depot round trip always
    /// fits, so every single-customer route is feasible.
    pub fn generate(size: usize, seed: u64) -> Result<Self> {
        ensure!(size >= 1, "population needs at least one customer");
        let mut rng = rng_from(derive_seed(seed, &[tag("vrp-population")]));
        let depot = Depot {
            x: 50.0,
            y: 50.0,
            a: 0.0,
            b: 1000.0,
        };
        let capacity = 200.0;
        let customers = (0..size)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..=100.0);
                let y: f64 = rng.random_range(0.0..=100.0);
                let service: f64 = rng.random_range(5.0..=15.0);
                let reach = libm::hypot(x - depot.x, y - depot.y);
                let earliest = depot.a + reach;
                let latest = depot.b - reach - service;
                let width: f64 = rng.random_range(60.0..=300.0);
                let start: f64 = rng.random_range(earliest..=latest);
                Customer {
                    x,
                    y,
                    delivery: rng.random_range(0.0..=30.0),
                    pickup: rng.random_range(0.0..=30.0),
                    a: start,
                    b: (start + width).min(latest),
                    service,
                }
            })
            .collect();
        Ok(SyntheticPopulation {
            depot,
            capacity,
            dispatch_cost: 300.0,
            unit_cost: 1.0,
            customers,
        })
    }

    /// An `n`-customer instance with one vehicle per four customers plus two.
    pub fn sample_instance(&self, n: usize, seed: u64) -> Result<VrpInstance> {
        ensure!(
            n >= 1 && n <= self.customers.len(),
            "cannot draw {n} customers from a population of {}",
            self.customers.len()
        );
        let mut rng = rng_from(derive_seed(seed, &[tag("vrp-sample")]));
        let mut picked: Vec<usize> = index::sample(&mut rng, self.customers.len(), n).into_vec();
        picked.sort_unstable();
        VrpInstance::new(
            &format!("vrp-n{n}-s{seed}"),
            self.depot,
            Fleet {
                vehicles: n / 4 + 2,
                capacity: self.capacity,
                dispatch_cost: self.dispatch_cost,
                unit_cost: self.unit_cost,
            },
            picked.into_iter().map(|i| self.customers[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::RunStatus;

    #[test]
    fn population_instances_are_valid_and_deterministic() {
        let pop = SyntheticPopulation::generate(500, 1).unwrap();
        assert_eq!(pop, SyntheticPopulation::generate(500, 1).unwrap());
        let a = pop.sample_instance(20, 3).unwrap();
        assert_eq!(a, pop.sample_instance(20, 3).unwrap());
        assert_eq!(a.len(), 20);
        assert!(!a.provably_infeasible());
        assert!(pop.sample_instance(501, 0).is_err());
    }

    #[test]
    fn solver_handles_population_instances() {
        let pop = SyntheticPopulation::generate(300, 2).unwrap();
        let problem = VrpProblem::new(0.05).unwrap();
        let inst = pop.sample_instance(20, 0).unwrap();
        let out = problem
            .run(&inst, &problem.space().default_configuration(), 0)
            .unwrap();
        assert_eq!(out.status, RunStatus::Success);
        let score = problem.score(&inst, &out).unwrap();
        assert!(score > 0.0 && score < PANC_PENALTY);
    }

    #[test]
    fn mutation_keeps_the_fleet_and_renames() {
        let pop = SyntheticPopulation::generate(100, 2).unwrap();
        let problem = VrpProblem::new(0.05).unwrap();
        let inst = pop.sample_instance(10, 0).unwrap();
        let child = problem.mutate(&inst, 7).unwrap();
        assert_eq!(child.fleet, inst.fleet);
        assert_ne!(problem.fingerprint(&child), problem.fingerprint(&inst));
        assert_eq!(child.name, "vrp-n10-s0-m7");
    }
}
