use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::configurator::{sample_configurations, tune, TuneBudget, TuneOptions};
use crate::error::{ensure, Error, Result};
use crate::params::Configuration;
use crate::portfolio::Portfolio;
use crate::problem::{Evaluator, Problem};
use crate::rng::{derive_seed, rng_from, tag};

use super::objective::{portfolio_mean, score_grid, CompletionObjective};
use super::{AuditEvent, Construction, InstancePool, Method, PoolMember};

type Inst<E> = <<E as Evaluator>::Problem as Problem>::Instance;

/// Greedy portfolio selection on a candidate × instance score matrix.
///
/// Starting from the empty portfolio, `k` times adds the candidate that
/// minimizes the mean over instances of the member-wise minimum. Ties go
/// to the earlier candidate. Returns candidate indices in pick order.
pub fn greedy_select(scores: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    ensure!(k >= 1, "K must be at least 1");
    ensure!(
        scores.len() >= k,
        "{} candidates cannot fill {k} slots",
        scores.len()
    );
    let width = scores[0].len();
    ensure!(width >= 1, "greedy selection needs at least one instance");
    ensure!(
        scores.iter().all(|r| r.len() == width),
        "ragged score matrix"
    );
    let mut current = vec![f64::INFINITY; width];
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (c, row) in scores.iter().enumerate() {
            if chosen.contains(&c) {
                continue;
            }
            let sum: f64 = row.iter().zip(&current).map(|(a, b)| a.min(*b)).sum();
            let mean = sum / width as f64;
            if best.map_or(true, |(_, b)| mean < b) {
                best = Some((c, mean));
            }
        }
        let (c, _) = best.expect("enough candidates remain");
        for (cur, s) in current.iter_mut().zip(&scores[c]) {
            *cur = cur.min(*s);
        }
        chosen.push(c);
    }
    Ok(chosen)
}

/// Evaluates every distinct candidate once (seed 0) on the pool and
/// greedily picks `k` of them. Returns the portfolio and its mean score.
pub fn greedy_init<E: Evaluator>(
    evaluator: &E,
    candidates: &[Configuration],
    pool: &InstancePool<Inst<E>>,
    k: usize,
) -> Result<(Portfolio, f64)> {
    ensure!(
        !pool.is_empty(),
        "greedy initialization needs training instances"
    );
    let mut distinct: Vec<&Configuration> = Vec::new();
    for c in candidates {
        if !distinct.iter().any(|d| d.fingerprint() == c.fingerprint()) {
            distinct.push(c);
        }
    }
    ensure!(
        distinct.len() >= k,
        "only {} distinct candidates for a portfolio of {k}",
        distinct.len()
    );
    let grid = score_grid(evaluator, &distinct, pool.members(), 1)?;
    let matrix: Vec<Vec<f64>> = grid
        .iter()
        .map(|per_inst| per_inst.iter().map(|s| s[0]).collect())
        .collect();
    let picks = greedy_select(&matrix, k)?;
    let score = portfolio_mean(&grid, &picks);
    let portfolio =
        Portfolio::with_max_size(picks.iter().map(|&i| distinct[i].clone()).collect(), k)?;
    Ok((portfolio, score))
}

/// Seeds per validation run in run-count mode: `max(1, floor(t_v / (K·|T|)))`.
pub fn validation_seeds(budget: TuneBudget, k: usize, instances: usize) -> Option<u64> {
    match budget {
        TuneBudget::Runs(t) => Some((t / (k.max(1) * instances.max(1)) as u64).max(1)),
        TuneBudget::WallClock(_) => None,
    }
}

/// Scores each candidate portfolio on the pool over validation seeds and
/// returns (scores, seeds used).
pub(crate) fn validate_portfolios<E: Evaluator>(
    evaluator: &E,
    candidates: &[Vec<Configuration>],
    pool: &InstancePool<Inst<E>>,
    budget: TuneBudget,
    k: usize,
) -> Result<(Vec<f64>, u64)> {
    let mut distinct: Vec<&Configuration> = Vec::new();
    for c in candidates.iter().flatten() {
        if !distinct.iter().any(|d| d.fingerprint() == c.fingerprint()) {
            distinct.push(c);
        }
    }
    let index: Vec<Vec<usize>> = candidates
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|m| {
                    distinct
                        .iter()
                        .position(|d| d.fingerprint() == m.fingerprint())
                        .expect("collected above")
                })
                .collect()
        })
        .collect();
    let score_with = |seeds: u64| -> Result<Vec<f64>> {
        let grid = score_grid(evaluator, &distinct, pool.members(), seeds)?;
        Ok(index.iter().map(|m| portfolio_mean(&grid, m)).collect())
    };
    match validation_seeds(budget, k, pool.len()) {
        Some(v) => Ok((score_with(v)?, v)),
        None => {
            let TuneBudget::WallClock(limit) = budget else {
                unreachable!()
            };
            let clock = || {
                evaluator.elapsed_seconds().ok_or_else(|| {
                    Error::NotApplicable("wall-clock validation needs an evaluator clock".into())
                })
            };
            let start = clock()?;
            let mut v = 1;
            loop {
                let scores = score_with(v)?;
                if clock()? - start >= limit {
                    return Ok((scores, v));
                }
                v += 1;
            }
        }
    }
}

/// Index of the smallest score; ties go to the earlier entry.
pub(crate) fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}

/// One round of configuration evolution.
///
/// `n` times a random member is dropped and the tuner searches for the
/// configuration that best completes the remaining members on the pool,
/// with the dropped member as incumbent. The temporary portfolios are then
/// validated and the best one (earliest on ties) is returned.
pub fn evolve_configs<E: Evaluator>(
    evaluator: &E,
    portfolio: &Portfolio,
    pool: &InstancePool<Inst<E>>,
    settings: &super::CepsSettings,
    round: usize,
    audit: &mut Vec<AuditEvent>,
) -> Result<Portfolio> {
    ensure!(
        !pool.is_empty(),
        "configuration evolution needs training instances"
    );
    let space = evaluator.problem().space().clone();
    let members = portfolio.members();
    let mut rng = rng_from(derive_seed(
        settings.seed,
        &[tag("evolve-configs"), round as u64],
    ));
    let mut temporaries: Vec<Vec<Configuration>> = Vec::with_capacity(settings.n);
    for slot in 0..settings.n {
        let (base, removed) = if settings.grow_only {
            (members.to_vec(), None)
        } else {
            let r = rng.random_range(0..members.len());
            (portfolio.without(r), Some(r))
        };
        let tune_seed = derive_seed(settings.seed, &[tag("tune"), round as u64, slot as u64]);
        let objective = CompletionObjective::new(evaluator, pool.members(), &base);
        let options = TuneOptions {
            batch_size: settings.tune_batch_size,
            incumbent: removed.map(|r| members[r].clone()),
            exclude: base.iter().map(Configuration::fingerprint).collect(),
            ..Default::default()
        };
        let result = tune(&space, &objective, settings.t_c, tune_seed, &options)?;
        audit.push(AuditEvent::TuneResult {
            round,
            slot,
            removed: removed.map(|r| members[r].fingerprint()),
            tune_seed,
            chosen: result.best.fingerprint(),
            tune_score: result.best_score,
            fresh_evaluations: result.fresh_evaluations,
        });
        let mut next = base;
        match removed {
            Some(r) => next.insert(r, result.best),
            None => next.push(result.best),
        }
        temporaries.push(next);
    }
    if settings.elitist {
        temporaries.push(members.to_vec());
    }
    let (scores, seeds) =
        validate_portfolios(evaluator, &temporaries, pool, settings.t_v, members.len())?;
    let winner = argmin(&scores);
    let kept_previous = settings.elitist && winner == settings.n;
    let chosen = temporaries.swap_remove(winner);
    audit.push(AuditEvent::PapSelected {
        round,
        index: (!kept_previous).then_some(winner),
        members: chosen.clone(),
        validation_seeds: seeds,
        candidate_scores: scores.clone(),
        score: scores[winner],
    });
    let max = if settings.grow_only {
        usize::MAX
    } else {
        members.len()
    };
    Portfolio::with_max_size(chosen, max)
}

/// f(s, Θ) for each pool member: the member-wise minimum of seed-0 runs.
pub(crate) fn fitness<E: Evaluator>(
    evaluator: &E,
    portfolio: &Portfolio,
    members: &[PoolMember<Inst<E>>],
) -> Result<Vec<f64>> {
    let configs: Vec<&Configuration> = portfolio.members().iter().collect();
    let grid = score_grid(evaluator, &configs, members, 1)?;
    Ok((0..members.len())
        .map(|s| grid.iter().map(|g| g[s][0]).fold(f64::INFINITY, f64::min))
        .collect())
}

fn generation_limit<E: Evaluator>(
    evaluator: &E,
    settings: &super::CepsSettings,
) -> Result<GenerationLimit> {
    Ok(match settings.t_i {
        TuneBudget::Runs(_) => GenerationLimit::Count(settings.instance_evolution_generations),
        TuneBudget::WallClock(limit) => {
            let start = evaluator.elapsed_seconds().ok_or_else(|| {
                Error::NotApplicable(
                    "wall-clock instance evolution needs an evaluator clock".into(),
                )
            })?;
            GenerationLimit::Until(start + limit)
        }
    })
}

enum GenerationLimit {
    Count(usize),
    Until(f64),
}

/// One round of instance evolution against the fixed portfolio.
///
/// A copy of the pool is scored with f(s, Θ); each generation mutates a
/// random member and lets the offspring replace a random member whose
/// fitness is strictly lower, or discards it. The result is the original
/// pool followed by the new members of the evolved copy.
pub fn evolve_instances<E: Evaluator>(
    evaluator: &E,
    pool: &InstancePool<Inst<E>>,
    portfolio: &Portfolio,
    settings: &super::CepsSettings,
    round: usize,
    audit: &mut Vec<AuditEvent>,
) -> Result<InstancePool<Inst<E>>> {
    ensure!(
        !pool.is_empty(),
        "instance evolution needs a non-empty pool"
    );
    let problem = evaluator.problem();
    let mut original = pool.clone();
    let fit = fitness(evaluator, portfolio, original.members())?;
    for (m, f) in original.members_mut().iter_mut().zip(&fit) {
        m.fitness = Some(*f);
    }
    let mut evolving = original.clone();
    let mut rng = rng_from(derive_seed(
        settings.seed,
        &[tag("evolve-instances"), round as u64],
    ));
    let limit = generation_limit(evaluator, settings)?;
    let mut generation = 0;
    loop {
        match limit {
            GenerationLimit::Count(g) if generation >= g => break,
            GenerationLimit::Until(t)
                if evaluator.elapsed_seconds().unwrap_or(f64::INFINITY) >= t =>
            {
                break
            }
            _ => {}
        }
        let parent = &evolving.members()[rng.random_range(0..evolving.len())];
        let mutation_seed = derive_seed(
            settings.seed,
            &[tag("mutation"), round as u64, generation as u64],
        );
        let child = problem.mutate(&parent.instance, mutation_seed)?;
        let child = PoolMember {
            fingerprint: problem.fingerprint(&child),
            instance: child,
            fitness: None,
        };
        let f = fitness(evaluator, portfolio, core::slice::from_ref(&child))?[0];
        audit.push(AuditEvent::Offspring {
            round,
            generation,
            parent: parent.fingerprint,
            child: child.fingerprint,
            mutation_seed,
            fitness: Some(f),
        });
        if !evolving.contains(child.fingerprint) {
            let lower: Vec<usize> = evolving
                .members()
                .iter()
                .enumerate()
                .filter(|(_, m)| m.fitness.is_some_and(|mf| mf < f))
                .map(|(i, _)| i)
                .collect();
            if !lower.is_empty() {
                let victim = lower[rng.random_range(0..lower.len())];
                let old = &evolving.members()[victim];
                audit.push(AuditEvent::Replacement {
                    round,
                    generation,
                    replaced: old.fingerprint,
                    replaced_fitness: old.fitness,
                    child: child.fingerprint,
                });
                evolving.replace(
                    victim,
                    PoolMember {
                        fitness: Some(f),
                        ..child
                    },
                );
            }
        }
        generation += 1;
    }
    for m in evolving.members() {
        original.push(m.clone());
    }
    audit.push(AuditEvent::Merge {
        round,
        pool: original
            .members()
            .iter()
            .map(|m| (m.fingerprint, m.fitness))
            .collect(),
    });
    Ok(original)
}

pub(crate) fn make_pool<E: Evaluator>(
    evaluator: &E,
    instances: Vec<Inst<E>>,
) -> Result<InstancePool<Inst<E>>> {
    ensure!(
        !instances.is_empty(),
        "construction needs at least one training instance"
    );
    let problem = evaluator.problem();
    Ok(InstancePool::new(instances.into_iter().map(|i| {
        let fp = problem.fingerprint(&i);
        (i, fp)
    })))
}

/// Samples the initial candidates and picks the initial portfolio.
pub(crate) fn initialize<E: Evaluator>(
    evaluator: &E,
    pool: &InstancePool<Inst<E>>,
    settings: &super::CepsSettings,
    method: Method,
    audit: &mut Vec<AuditEvent>,
) -> Result<Portfolio> {
    let space = evaluator.problem().space();
    let mut candidates = sample_configurations(
        space,
        settings.init_sample_size,
        derive_seed(settings.seed, &[tag("init")]),
    )?;
    if let TuneBudget::Runs(t) = settings.t_init {
        let affordable = (t / pool.len() as u64) as usize;
        ensure!(
            affordable >= settings.k,
            "t_init = {t} runs cannot evaluate {} candidates on {} instances",
            settings.k,
            pool.len()
        );
        candidates.truncate(affordable);
    }
    let (portfolio, score) = greedy_init(evaluator, &candidates, pool, settings.k)?;
    audit.push(AuditEvent::Init {
        method,
        seed: settings.seed,
        training: pool.fingerprints(),
        candidates: candidates.iter().map(Configuration::fingerprint).collect(),
        members: portfolio.members().to_vec(),
        score: Some(score),
    });
    Ok(portfolio)
}

/// The full co-evolution: greedy initialization, then `max_ite` rounds of
/// configuration evolution with instance evolution between rounds.
/// `max_ite = 0` yields the initial portfolio.
pub fn run_ceps<E: Evaluator>(
    evaluator: &E,
    training: Vec<Inst<E>>,
    settings: &super::CepsSettings,
) -> Result<Construction<Inst<E>>> {
    settings.validate()?;
    let mut pool = make_pool(evaluator, training)?;
    let mut audit = Vec::new();
    let method = if settings.max_ite == 0 {
        Method::Initial
    } else {
        Method::Ceps
    };
    let initial = initialize(evaluator, &pool, settings, method, &mut audit)?;
    let mut portfolio = initial.clone();
    for ite in 1..=settings.max_ite {
        portfolio = evolve_configs(evaluator, &portfolio, &pool, settings, ite, &mut audit)?;
        if ite == settings.max_ite {
            break;
        }
        pool = evolve_instances(evaluator, &pool, &portfolio, settings, ite, &mut audit)?;
    }
    Ok(Construction {
        method,
        portfolio,
        initial: Some(initial),
        pool,
        audit,
    })
}
