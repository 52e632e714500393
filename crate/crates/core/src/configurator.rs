//! Configuration sampling and a budgeted successive-halving tuner.
//!
//! The tuner only needs a black-box objective that scores a configuration
//! on one (instance, seed) pair; the mean over a schedule of such pairs is
//! minimized. Each batch of candidates is raced over rungs r = 0, 1, ...
//! where rung r uses a growing prefix of a seeded instance order and the
//! seeds `0..=r`. The worse half is dropped after every rung.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fingerprint::Fingerprint;
use crate::params::{Configuration, Domain, ParameterSpace, Value};
use crate::rng::{derive_seed, rng_from, tag, SeededRng};

/// Draws `count` configurations uniformly. Duplicates are redrawn, up to
/// `10 * count` draws in total; a space too small to supply `count`
/// distinct points then yields repeats.
pub fn sample_configurations(
    space: &ParameterSpace,
    count: usize,
    seed: u64,
) -> Result<Vec<Configuration>> {
    ensure!(count >= 1, "sample count must be at least 1");
    ensure!(
        !space.parameters().is_empty(),
        "space {} has no parameters",
        space.id()
    );
    let mut rng = rng_from(derive_seed(seed, &[tag("sample-configurations")]));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10 * count {
        attempts += 1;
        let cfg = space.sample(&mut rng);
        if seen.insert(cfg.fingerprint()) {
            out.push(cfg);
        }
    }
    while out.len() < count {
        out.push(space.sample(&mut rng));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneBudget {
    /// Distinct objective evaluations within one call; repeating one is
    /// free. Results the evaluator already holds still count, so the search
    /// does not depend on the state of the run cache.
    Runs(u64),
    /// Seconds measured by the objective's clock.
    WallClock(f64),
}

impl TuneBudget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TuneBudget::Runs(n) => ensure!(n > 0, "run budget must be positive"),
            TuneBudget::WallClock(s) => ensure!(
                s > 0.0 && s.is_finite(),
                "wall-clock budget must be positive"
            ),
        }
        Ok(())
    }
}

/// One scoring request: configuration, instance index, seed.
pub type Request<'a> = (&'a Configuration, usize, u64);

/// A deterministic score to minimize, defined per (configuration,
/// instance, seed).
pub trait TuneObjective {
    fn instance_count(&self) -> usize;

    /// Scores in request order.
    fn evaluate(&self, requests: &[Request<'_>]) -> Result<Vec<f64>>;

    /// Seconds on the objective's clock, if it has one.
    fn elapsed_seconds(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct TuneOptions {
    pub batch_size: usize,
    /// Share of each later batch drawn fresh instead of perturbed.
    pub fresh_fraction: f64,
    /// Always raced and never eliminated.
    pub incumbent: Option<Configuration>,
    /// Configurations the tuner must not propose.
    pub exclude: BTreeSet<Fingerprint>,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            batch_size: 16,
            fresh_fraction: 0.25,
            incumbent: None,
            exclude: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RungRecord {
    pub batch: usize,
    pub rung: usize,
    pub instances: usize,
    pub seeds: u64,
    /// Candidates raced at this rung with their mean score.
    pub scores: Vec<(Fingerprint, f64)>,
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub best: Configuration,
    pub best_score: f64,
    /// Rung at which `best` was compared.
    pub rung: usize,
    /// Evaluations charged against a run budget.
    pub fresh_evaluations: u64,
    pub history: Vec<RungRecord>,
}

type MemoKey = (Fingerprint, usize, u64);

struct Race<'o, O: ?Sized> {
    objective: &'o O,
    order: Vec<usize>,
    rungs: usize,
    memo: BTreeMap<MemoKey, f64>,
    fresh: u64,
    budget: TuneBudget,
    started: f64,
}

impl<O: TuneObjective + ?Sized> Race<'_, O> {
    fn schedule(&self, rung: usize) -> (usize, u64) {
        let total = self.order.len();
        let full = 1usize << (self.rungs - 1);
        let n = (total * (1usize << rung)).div_ceil(full).clamp(1, total);
        (n, rung as u64 + 1)
    }

    fn requests<'c>(&self, candidates: &[&'c Configuration], rung: usize) -> Vec<Request<'c>> {
        let (n, seeds) = self.schedule(rung);
        let mut out = Vec::new();
        for cfg in candidates {
            for &inst in &self.order[..n] {
                for seed in 0..seeds {
                    if !self.memo.contains_key(&(cfg.fingerprint(), inst, seed)) {
                        out.push((*cfg, inst, seed));
                    }
                }
            }
        }
        out
    }

    /// Requests not yet in the memo, counted once each.
    fn fresh_cost(&self, requests: &[Request<'_>]) -> u64 {
        let keys: BTreeSet<MemoKey> = requests
            .iter()
            .map(|&(cfg, inst, seed)| (cfg.fingerprint(), inst, seed))
            .collect();
        keys.len() as u64
    }

    fn affordable(&self, cost: u64) -> Result<bool> {
        Ok(match self.budget {
            TuneBudget::Runs(limit) => self.fresh + cost <= limit,
            TuneBudget::WallClock(limit) => self.now()? - self.started < limit,
        })
    }

    fn now(&self) -> Result<f64> {
        self.objective.elapsed_seconds().ok_or_else(|| {
            Error::NotApplicable("wall-clock budget needs an objective with a clock".into())
        })
    }

    fn run(&mut self, requests: &[Request<'_>], cost: u64) -> Result<()> {
        if requests.is_empty() {
            return Ok(());
        }
        let scores = self.objective.evaluate(requests)?;
        ensure!(
            scores.len() == requests.len(),
            "objective returned {} scores for {} requests",
            scores.len(),
            requests.len()
        );
        for (&(cfg, inst, seed), s) in requests.iter().zip(scores) {
            self.memo.insert((cfg.fingerprint(), inst, seed), s);
        }
        self.fresh += cost;
        Ok(())
    }

    fn score(&self, cfg: &Configuration, rung: usize) -> f64 {
        let (n, seeds) = self.schedule(rung);
        let mut sum = 0.0;
        for &inst in &self.order[..n] {
            for seed in 0..seeds {
                sum += self.memo[&(cfg.fingerprint(), inst, seed)];
            }
        }
        sum / (n as u64 * seeds) as f64
    }
}

/// Successive-halving race over `space` until `budget` is spent.
///
/// Returns the best configuration among those raced at the deepest rung
/// any batch reached. A supplied incumbent takes part in every batch and
/// is never eliminated, so the result never scores worse than it on the
/// schedule used for the final comparison.
pub fn tune<O: TuneObjective + ?Sized>(
    space: &ParameterSpace,
    objective: &O,
    budget: TuneBudget,
    seed: u64,
    options: &TuneOptions,
) -> Result<TuneResult> {
    budget.validate()?;
    let total = objective.instance_count();
    ensure!(total >= 1, "tuning needs at least one instance");
    ensure!(options.batch_size >= 2, "batch size must be at least 2");
    ensure!(
        (0.0..=1.0).contains(&options.fresh_fraction),
        "fresh_fraction must lie in [0, 1]"
    );
    if let Some(inc) = &options.incumbent {
        space.validate(inc)?;
    }
    let mut rng = rng_from(derive_seed(seed, &[tag("tune")]));
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let rungs = (usize::BITS - 1 - options.batch_size.leading_zeros()) as usize;
    let started = match budget {
        TuneBudget::WallClock(_) => objective.elapsed_seconds().ok_or_else(|| {
            Error::NotApplicable("wall-clock budget needs an objective with a clock".into())
        })?,
        TuneBudget::Runs(_) => 0.0,
    };
    let mut race = Race {
        objective,
        order,
        rungs,
        memo: BTreeMap::new(),
        fresh: 0,
        budget,
        started,
    };

    let mut seen: BTreeSet<Fingerprint> = BTreeSet::new();
    // best-known candidates per deepest rung: (rung, score, config)
    let mut ranking: Vec<(usize, f64, Configuration)> = Vec::new();
    let mut history = Vec::new();
    let mut batch_index = 0;
    'batches: loop {
        let mut batch = Vec::new();
        if let Some(inc) = &options.incumbent {
            batch.push(inc.clone());
        }
        if let Some((_, _, best)) = ranking.first() {
            if !batch.contains(best) {
                batch.push(best.clone());
            }
        }
        let fresh_slots = if batch_index == 0 {
            options.batch_size
        } else {
            libm::ceil(options.fresh_fraction * options.batch_size as f64) as usize
        };
        let mut guard = 0;
        while batch.len() < options.batch_size && guard < 100 * options.batch_size {
            guard += 1;
            let take_fresh = ranking.is_empty() || batch.len() + fresh_slots >= options.batch_size;
            let cand = if take_fresh {
                space.sample(&mut rng)
            } else {
                let elites = ranking.len().min(4);
                let parent = &ranking[rng.random_range(0..elites)].2;
                perturb(space, parent, &mut rng)?
            };
            let fp = cand.fingerprint();
            if options.exclude.contains(&fp) || seen.contains(&fp) || batch.contains(&cand) {
                continue;
            }
            batch.push(cand);
        }
        let mut unseen = 0;
        for c in &batch {
            if seen.insert(c.fingerprint()) {
                unseen += 1;
            }
        }
        if unseen == 0 {
            break;
        }

        let mut alive: Vec<Configuration> = batch;
        for rung in 0..rungs {
            let refs: Vec<&Configuration> = alive.iter().collect();
            let mut requests = race.requests(&refs, rung);
            let mut cost = race.fresh_cost(&requests);
            if !race.affordable(cost)? {
                if batch_index > 0 || rung > 0 {
                    break 'batches;
                }
                // shrink the opening batch until its first rung fits
                while alive.len() > 1 && !race.affordable(cost)? {
                    alive.pop();
                    let refs: Vec<&Configuration> = alive.iter().collect();
                    requests = race.requests(&refs, rung);
                    cost = race.fresh_cost(&requests);
                }
                if !race.affordable(cost)? {
                    return Err(Error::invalid(format!(
                        "budget {budget:?} cannot evaluate one configuration on one instance"
                    )));
                }
            }
            race.run(&requests, cost)?;
            let mut scored: Vec<(f64, Configuration)> = alive
                .into_iter()
                .map(|c| (race.score(&c, rung), c))
                .collect();
            scored.sort_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(a.1.fingerprint().cmp(&b.1.fingerprint()))
            });
            let (n, seeds) = race.schedule(rung);
            history.push(RungRecord {
                batch: batch_index,
                rung,
                instances: n,
                seeds,
                scores: scored.iter().map(|(s, c)| (c.fingerprint(), *s)).collect(),
            });
            for (s, c) in &scored {
                record(&mut ranking, rung, *s, c);
            }
            let keep = scored.len().div_ceil(2).max(1);
            let incumbent = options.incumbent.as_ref();
            alive = scored
                .iter()
                .enumerate()
                .filter(|(i, (_, c))| *i < keep || Some(c) == incumbent)
                .map(|(_, (_, c))| c.clone())
                .collect();
        }
        batch_index += 1;
        if let TuneBudget::Runs(limit) = budget {
            if race.fresh >= limit {
                break;
            }
        }
    }

    let (rung, best_score, best) = ranking
        .into_iter()
        .next()
        .ok_or_else(|| Error::invalid("tuning evaluated no configuration"))?;
    Ok(TuneResult {
        best,
        best_score,
        rung,
        fresh_evaluations: race.fresh,
        history,
    })
}

/// Keeps `ranking` sorted: deepest rung first, then score, then fingerprint.
fn record(
    ranking: &mut Vec<(usize, f64, Configuration)>,
    rung: usize,
    score: f64,
    cfg: &Configuration,
) {
    if let Some(pos) = ranking.iter().position(|(_, _, c)| c == cfg) {
        if ranking[pos].0 >= rung {
            return;
        }
        ranking.remove(pos);
    }
    let key = |r: &(usize, f64, Configuration)| (core::cmp::Reverse(r.0), r.1, r.2.fingerprint());
    let entry = (rung, score, cfg.clone());
    let at = ranking
        .iter()
        .position(|e| {
            let (a, b) = (key(e), key(&entry));
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .is_gt()
        })
        .unwrap_or(ranking.len());
    ranking.insert(at, entry);
}

/// Gaussian step of 10% of the range on numeric parameters, redraw with
/// probability 0.2 on categorical ones.
pub fn perturb(
    space: &ParameterSpace,
    parent: &Configuration,
    rng: &mut SeededRng,
) -> Result<Configuration> {
    for _ in 0..8 {
        let mut values = BTreeMap::new();
        for p in space.parameters() {
            let current = parent
                .get(&p.name)
                .ok_or_else(|| Error::invalid(format!("configuration lacks {}", p.name)))?;
            let v = match (&p.domain, current) {
                (Domain::Real { lo, hi }, Value::Real(x)) => {
                    let step = Normal::new(0.0, 0.1 * (hi - lo))
                        .map_err(|e| Error::invalid(format!("{e}")))?;
                    Value::Real((x + step.sample(rng)).clamp(*lo, *hi))
                }
                (Domain::Integer { lo, hi }, Value::Int(i)) => {
                    let step = Normal::new(0.0, 0.1 * (hi - lo) as f64)
                        .map_err(|e| Error::invalid(format!("{e}")))?;
                    let moved = libm::round(*i as f64 + step.sample(rng)) as i64;
                    Value::Int(moved.clamp(*lo, *hi))
                }
                (domain @ Domain::Categorical(_), v) => {
                    if rng.random_bool(0.2) {
                        domain.sample(rng)
                    } else {
                        v.clone()
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "value of {} does not match its domain",
                        p.name
                    )))
                }
            };
            values.insert(p.name.clone(), v);
        }
        let child = space.configure(values)?;
        if child != *parent {
            return Ok(child);
        }
    }
    Ok(space.sample(rng))
}
