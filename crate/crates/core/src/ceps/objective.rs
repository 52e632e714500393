use alloc::vec::Vec;

use crate::configurator::{Request, TuneObjective};
use crate::error::Result;
use crate::params::{Configuration, ParameterSpace};
use crate::problem::{Evaluator, Job, Problem};

use super::PoolMember;

type Inst<E> = <<E as Evaluator>::Problem as Problem>::Instance;

/// Score of `base ∪ {θ}` per (instance, seed): the better of the
/// candidate and the fixed members.
pub struct CompletionObjective<'a, E: Evaluator> {
    evaluator: &'a E,
    pool: &'a [PoolMember<Inst<E>>],
    base: &'a [Configuration],
}

impl<E: Evaluator> core::fmt::Debug for CompletionObjective<'_, E> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CompletionObjective")
            .field("instances", &self.pool.len())
            .field("base", &self.base.len())
            .finish()
    }
}

impl<'a, E: Evaluator> CompletionObjective<'a, E> {
    pub fn new(
        evaluator: &'a E,
        pool: &'a [PoolMember<Inst<E>>],
        base: &'a [Configuration],
    ) -> Self {
        CompletionObjective {
            evaluator,
            pool,
            base,
        }
    }
}

impl<E: Evaluator> TuneObjective for CompletionObjective<'_, E> {
    fn instance_count(&self) -> usize {
        self.pool.len()
    }

    fn evaluate(&self, requests: &[Request<'_>]) -> Result<Vec<f64>> {
        let width = self.base.len() + 1;
        let mut jobs = Vec::with_capacity(requests.len() * width);
        for &(cfg, inst, seed) in requests {
            let member = &self.pool[inst];
            jobs.push(job(cfg, member, seed));
            jobs.extend(self.base.iter().map(|b| job(b, member, seed)));
        }
        let scores = self.evaluator.scores(&jobs)?;
        Ok(scores
            .chunks(width)
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect())
    }

    fn elapsed_seconds(&self) -> Option<f64> {
        self.evaluator.elapsed_seconds()
    }
}

/// A whole portfolio encoded as one point of the K-fold product of
/// `member_space`.
pub struct JointObjective<'a, E: Evaluator> {
    evaluator: &'a E,
    pool: &'a [PoolMember<Inst<E>>],
    member_space: &'a ParameterSpace,
    k: usize,
}

impl<E: Evaluator> core::fmt::Debug for JointObjective<'_, E> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("JointObjective")
            .field("k", &self.k)
            .finish()
    }
}

impl<'a, E: Evaluator> JointObjective<'a, E> {
    pub fn new(
        evaluator: &'a E,
        pool: &'a [PoolMember<Inst<E>>],
        member_space: &'a ParameterSpace,
        k: usize,
    ) -> Self {
        JointObjective {
            evaluator,
            pool,
            member_space,
            k,
        }
    }
}

impl<E: Evaluator> TuneObjective for JointObjective<'_, E> {
    fn instance_count(&self) -> usize {
        self.pool.len()
    }

    fn evaluate(&self, requests: &[Request<'_>]) -> Result<Vec<f64>> {
        let mut split = Vec::with_capacity(requests.len());
        for &(cfg, _, _) in requests {
            split.push(self.member_space.split_product(self.k, cfg)?);
        }
        let mut jobs = Vec::with_capacity(requests.len() * self.k);
        for (&(_, inst, seed), members) in requests.iter().zip(&split) {
            jobs.extend(members.iter().map(|m| job(m, &self.pool[inst], seed)));
        }
        let scores = self.evaluator.scores(&jobs)?;
        Ok(scores
            .chunks(self.k)
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect())
    }

    fn elapsed_seconds(&self) -> Option<f64> {
        self.evaluator.elapsed_seconds()
    }
}

pub(crate) fn job<'a, I>(
    config: &'a Configuration,
    member: &'a PoolMember<I>,
    seed: u64,
) -> Job<'a, I> {
    Job {
        config,
        instance: &member.instance,
        instance_fp: member.fingerprint,
        seed,
    }
}

/// `grid[c][s][seed]` scores for configurations × pool × seeds `0..seeds`,
/// requested in one batch.
pub(crate) fn score_grid<E: Evaluator>(
    evaluator: &E,
    configs: &[&Configuration],
    pool: &[PoolMember<Inst<E>>],
    seeds: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut jobs = Vec::with_capacity(configs.len() * pool.len() * seeds as usize);
    for cfg in configs {
        for member in pool {
            for seed in 0..seeds {
                jobs.push(job(cfg, member, seed));
            }
        }
    }
    let flat = evaluator.scores(&jobs)?;
    let per_cfg = pool.len() * seeds as usize;
    Ok(flat
        .chunks(per_cfg.max(1))
        .take(configs.len())
        .map(|c| c.chunks(seeds as usize).map(<[f64]>::to_vec).collect())
        .collect())
}

/// Mean over instances and seeds of the member-wise minimum.
pub(crate) fn portfolio_mean(grid: &[Vec<Vec<f64>>], members: &[usize]) -> f64 {
    let instances = grid[members[0]].len();
    let seeds = grid[members[0]].first().map_or(0, Vec::len);
    let mut sum = 0.0;
    for s in 0..instances {
        for r in 0..seeds {
            sum += members
                .iter()
                .map(|&m| grid[m][s][r])
                .fold(f64::INFINITY, f64::min);
        }
    }
    sum / (instances * seeds) as f64
}
