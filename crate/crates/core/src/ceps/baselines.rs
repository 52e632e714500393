use alloc::vec::Vec;

use rand::Rng;

use crate::configurator::{tune, TuneBudget, TuneOptions};
use crate::error::Result;
use crate::params::Configuration;
use crate::portfolio::Portfolio;
use crate::problem::{Evaluator, Problem};
use crate::rng::{derive_seed, rng_from, tag};

use super::evolve::{argmin, evolve_configs, initialize, make_pool, run_ceps, validate_portfolios};
use super::objective::{CompletionObjective, JointObjective};
use super::{AuditEvent, CepsSettings, Construction, Method, PoolMember};

type Inst<E> = <<E as Evaluator>::Problem as Problem>::Instance;

/// Runs any construction method by name.
pub fn run_method<E: Evaluator>(
    method: Method,
    evaluator: &E,
    training: Vec<Inst<E>>,
    settings: &CepsSettings,
) -> Result<Construction<Inst<E>>> {
    match method {
        Method::Ceps => run_ceps(evaluator, training, settings),
        other => run_baseline(other, evaluator, training, settings),
    }
}

/// The comparison methods.
///
/// * `global` tunes all K members at once in the K-fold product space with
///   `n` times the per-call tuning budget.
/// * `parhydra` adds one member per round; each round runs `n` tuner calls
///   for the best completion of the current members and keeps the best
///   validated one.
/// * `eps` first grows the training set by `(max_ite - 1) * generations`
///   mutation attempts, each offspring joining unconditionally, then runs
///   the configuration rounds of the co-evolution on that fixed set.
/// * `initial` stops after greedy initialization.
pub fn run_baseline<E: Evaluator>(
    method: Method,
    evaluator: &E,
    training: Vec<Inst<E>>,
    settings: &CepsSettings,
) -> Result<Construction<Inst<E>>> {
    settings.validate()?;
    let pool = make_pool(evaluator, training)?;
    let mut audit = Vec::new();
    match method {
        Method::Ceps => run_ceps(evaluator, pool.instances(), settings),
        Method::Initial => {
            let initial = initialize(evaluator, &pool, settings, Method::Initial, &mut audit)?;
            Ok(Construction {
                method,
                portfolio: initial.clone(),
                initial: Some(initial),
                pool,
                audit,
            })
        }
        Method::Global => {
            let space = evaluator.problem().space();
            let joint = space.product(settings.k)?;
            let objective = JointObjective::new(evaluator, pool.members(), space, settings.k);
            let budget = scale(settings.t_c, settings.n);
            let tune_seed = derive_seed(settings.seed, &[tag("global")]);
            let options = TuneOptions {
                batch_size: settings.tune_batch_size,
                ..Default::default()
            };
            audit.push(init_event(method, settings, &pool, Vec::new()));
            let result = tune(&joint, &objective, budget, tune_seed, &options)?;
            audit.push(AuditEvent::TuneResult {
                round: 1,
                slot: 0,
                removed: None,
                tune_seed,
                chosen: result.best.fingerprint(),
                tune_score: result.best_score,
                fresh_evaluations: result.fresh_evaluations,
            });
            let mut members: Vec<Configuration> = Vec::new();
            for m in space.split_product(settings.k, &result.best)? {
                if !members.contains(&m) {
                    members.push(m);
                }
            }
            audit.push(AuditEvent::PapSelected {
                round: 1,
                index: Some(0),
                members: members.clone(),
                validation_seeds: 0,
                candidate_scores: alloc::vec![result.best_score],
                score: result.best_score,
            });
            Ok(Construction {
                method,
                portfolio: Portfolio::with_max_size(members, settings.k)?,
                initial: None,
                pool,
                audit,
            })
        }
        Method::Parhydra => {
            let space = evaluator.problem().space().clone();
            audit.push(init_event(method, settings, &pool, Vec::new()));
            let mut current: Vec<Configuration> = Vec::new();
            for round in 1..=settings.k {
                let mut candidates = Vec::with_capacity(settings.n);
                for slot in 0..settings.n {
                    let tune_seed =
                        derive_seed(settings.seed, &[tag("parhydra"), round as u64, slot as u64]);
                    let objective = CompletionObjective::new(evaluator, pool.members(), &current);
                    let options = TuneOptions {
                        batch_size: settings.tune_batch_size,
                        exclude: current.iter().map(Configuration::fingerprint).collect(),
                        ..Default::default()
                    };
                    let result = tune(&space, &objective, settings.t_c, tune_seed, &options)?;
                    audit.push(AuditEvent::TuneResult {
                        round,
                        slot,
                        removed: None,
                        tune_seed,
                        chosen: result.best.fingerprint(),
                        tune_score: result.best_score,
                        fresh_evaluations: result.fresh_evaluations,
                    });
                    let mut next = current.clone();
                    next.push(result.best);
                    candidates.push(next);
                }
                let (scores, seeds) =
                    validate_portfolios(evaluator, &candidates, &pool, settings.t_v, round)?;
                let winner = argmin(&scores);
                current = candidates.swap_remove(winner);
                audit.push(AuditEvent::PapSelected {
                    round,
                    index: Some(winner),
                    members: current.clone(),
                    validation_seeds: seeds,
                    candidate_scores: scores.clone(),
                    score: scores[winner],
                });
            }
            Ok(Construction {
                method,
                portfolio: Portfolio::with_max_size(current, settings.k)?,
                initial: None,
                pool,
                audit,
            })
        }
        Method::Eps => {
            let problem = evaluator.problem();
            let mut augmented = pool;
            let attempts =
                settings.max_ite.saturating_sub(1) * settings.instance_evolution_generations;
            let mut rng = rng_from(derive_seed(settings.seed, &[tag("eps-augment")]));
            for generation in 0..attempts {
                let parent = &augmented.members()[rng.random_range(0..augmented.len())];
                let mutation_seed =
                    derive_seed(settings.seed, &[tag("eps-mutation"), generation as u64]);
                let child = problem.mutate(&parent.instance, mutation_seed)?;
                let child = PoolMember {
                    fingerprint: problem.fingerprint(&child),
                    instance: child,
                    fitness: None,
                };
                audit.push(AuditEvent::Offspring {
                    round: 0,
                    generation,
                    parent: parent.fingerprint,
                    child: child.fingerprint,
                    mutation_seed,
                    fitness: None,
                });
                augmented.push(child);
            }
            audit.push(AuditEvent::Merge {
                round: 0,
                pool: augmented
                    .members()
                    .iter()
                    .map(|m| (m.fingerprint, None))
                    .collect(),
            });
            let initial = initialize(evaluator, &augmented, settings, method, &mut audit)?;
            let mut portfolio = initial.clone();
            for ite in 1..=settings.max_ite {
                portfolio =
                    evolve_configs(evaluator, &portfolio, &augmented, settings, ite, &mut audit)?;
            }
            Ok(Construction {
                method,
                portfolio,
                initial: Some(initial),
                pool: augmented,
                audit,
            })
        }
    }
}

fn scale(budget: TuneBudget, n: usize) -> TuneBudget {
    match budget {
        TuneBudget::Runs(r) => TuneBudget::Runs(r.saturating_mul(n as u64)),
        TuneBudget::WallClock(s) => TuneBudget::WallClock(s * n as f64),
    }
}

fn init_event<I: Clone>(
    method: Method,
    settings: &CepsSettings,
    pool: &super::InstancePool<I>,
    members: Vec<Configuration>,
) -> AuditEvent {
    AuditEvent::Init {
        method,
        seed: settings.seed,
        training: pool.fingerprints(),
        candidates: Vec::new(),
        members,
        score: None,
    }
}
