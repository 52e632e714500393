use alloc::format;

use crate::clock::TimeSource;
use crate::error::{ensure, Error, Result};
use crate::fingerprint::Fingerprint;
use crate::instgen::mutate_tsp;
use crate::outcome::{RunOutcome, RunStatus};
use crate::params::{Configuration, ParameterSpace};
use crate::problem::{Problem, ProblemKind};
use crate::rng::derive_seed;
use crate::tsp::{
    held_karp_optimum, search, solve, tsp_space, Provenance, TspInstance, TspParams,
    HELD_KARP_MAX_CITIES,
};

pub const PAR10_FACTOR: f64 = 10.0;

/// Penalized average runtime: successes count their elapsed time,
/// everything else counts `PAR10_FACTOR * cutoff`.
pub fn par10(outcomes: &[RunOutcome], cutoff: f64) -> Result<f64> {
    ensure!(!outcomes.is_empty(), "par10 of an empty list");
    let mut total = 0.0;
    for o in outcomes {
        ensure!(
            o.cutoff == cutoff,
            "outcome cutoff {} differs from {cutoff}",
            o.cutoff
        );
        total += match o.status {
            RunStatus::Success => o.elapsed,
            _ => PAR10_FACTOR * cutoff,
        };
    }
    Ok(total / outcomes.len() as f64)
}

/// TSP with the built-in local search as the parameterized solver and
/// PAR-10 as the measure.
#[derive(Clone, Debug)]
pub struct TspProblem {
    space: ParameterSpace,
    pub cutoff: f64,
    pub time: TimeSource,
    /// Independent runs used to certify optima beyond the exact range.
    pub consensus_runs: u64,
    /// Cutoff multiplier for those runs.
    pub consensus_cutoff_factor: f64,
}

impl TspProblem {
    pub fn new(cutoff: f64) -> Result<Self> {
        ensure!(
            cutoff > 0.0 && cutoff.is_finite(),
            "cutoff must be positive, got {cutoff}"
        );
        Ok(TspProblem {
            space: tsp_space(),
            cutoff,
            time: TimeSource::WorkUnits,
            consensus_runs: 10,
            consensus_cutoff_factor: 10.0,
        })
    }

    pub fn with_time(mut self, time: TimeSource) -> Self {
        self.time = time;
        self
    }

    /// Attaches a reference optimum: exact for small instances, otherwise the
    /// best length over `consensus_runs` long runs of the default solver.
    pub fn certify(&self, instance: &TspInstance) -> Result<TspInstance> {
        let mut out = instance.clone();
        if instance.len() <= HELD_KARP_MAX_CITIES {
            let opt = held_karp_optimum(instance)?;
            out.reference_optimum = None;
            return Ok(out.with_optimum(opt, Provenance::Exact));
        }
        let params = TspParams::from_config(&self.space.default_configuration())?;
        let base = instance.fingerprint();
        let seed_base = u64::from_le_bytes(base.as_bytes()[..8].try_into().expect("8 bytes"));
        let best = (0..self.consensus_runs)
            .map(|k| {
                search(
                    instance,
                    &params,
                    derive_seed(seed_base, &[k]),
                    self.cutoff * self.consensus_cutoff_factor,
                    None,
                    &TimeSource::WorkUnits,
                )
                .best_length
            })
            .min()
            .ok_or_else(|| Error::invalid("consensus needs at least one run"))?;
        Ok(out.with_optimum(best, Provenance::Consensus))
    }
}

impl Problem for TspProblem {
    type Instance = TspInstance;

    fn kind(&self) -> ProblemKind {
        ProblemKind::Tsp
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn fingerprint(&self, instance: &TspInstance) -> Fingerprint {
        instance.fingerprint()
    }

    fn mutate(&self, instance: &TspInstance, seed: u64) -> Result<TspInstance> {
        let mut child = mutate_tsp(instance, seed)?;
        child.name = format!("{}-m{}", instance.name, seed % 100_000);
        self.certify(&child)
    }

    fn run(&self, instance: &TspInstance, config: &Configuration, seed: u64) -> Result<RunOutcome> {
        solve(instance, config, seed, self.cutoff, &self.time)
    }

    fn score(&self, _instance: &TspInstance, outcome: &RunOutcome) -> Result<f64> {
        par10(core::slice::from_ref(outcome), outcome.cutoff)
    }

    fn timeout_penalty(&self) -> f64 {
        PAR10_FACTOR * self.cutoff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn par10_examples() {
        assert_eq!(par10(&[RunOutcome::timeout(0, 10.0)], 10.0).unwrap(), 100.0);
        let mixed = [
            RunOutcome::success(2.0, 5.0, 0, 10.0),
            RunOutcome::timeout(1, 10.0),
        ];
        assert_eq!(par10(&mixed, 10.0).unwrap(), 51.0);
        let ok = [
            RunOutcome::success(1.0, 5.0, 0, 10.0),
            RunOutcome::success(4.0, 5.0, 1, 10.0),
        ];
        assert_eq!(par10(&ok, 10.0).unwrap(), 2.5);
        assert!(par10(&[], 10.0).is_err());
        assert!(par10(&[RunOutcome::timeout(0, 5.0)], 10.0).is_err());
    }

    #[test]
    fn each_timeout_adds_nine_cutoffs_over_n() {
        let cutoff = 10.0;
        let outs = vec![
            RunOutcome::success(2.0, 1.0, 0, cutoff),
            RunOutcome::timeout(1, cutoff),
            RunOutcome::success(3.0, 1.0, 2, cutoff),
            RunOutcome::timeout(3, cutoff),
        ];
        let plain: f64 = outs.iter().map(|o| o.elapsed).sum::<f64>() / 4.0;
        let penalized = par10(&outs, cutoff).unwrap();
        assert_eq!(
            penalized - plain,
            2.0 * (PAR10_FACTOR * cutoff - cutoff) / 4.0
        );
    }

    #[test]
    fn timeout_penalty_is_ten_cutoffs() {
        assert_eq!(TspProblem::new(10.0).unwrap().timeout_penalty(), 100.0);
    }
}
