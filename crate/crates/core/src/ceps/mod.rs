//! Portfolio construction: greedy initialization, the alternating
//! evolution of the portfolio and the training instance pool, and the
//! baseline construction methods.

mod baselines;
mod evolve;
mod objective;

use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::configurator::TuneBudget;
use crate::error::{ensure, Error, Result};
use crate::fingerprint::Fingerprint;
use crate::params::Configuration;
use crate::portfolio::Portfolio;

pub use baselines::{run_baseline, run_method};
pub use evolve::{
    evolve_configs, evolve_instances, greedy_init, greedy_select, run_ceps, validation_seeds,
};
pub use objective::{CompletionObjective, JointObjective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ceps,
    Eps,
    Global,
    Parhydra,
    Initial,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ceps,
        Method::Eps,
        Method::Global,
        Method::Parhydra,
        Method::Initial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ceps => "ceps",
            Method::Eps => "eps",
            Method::Global => "global",
            Method::Parhydra => "parhydra",
            Method::Initial => "initial",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CepsSettings {
    /// Portfolio size.
    pub k: usize,
    pub max_ite: usize,
    /// Temporary portfolios per configuration-evolution round.
    pub n: usize,
    pub init_sample_size: usize,
    /// Initial candidate evaluation; in run mode caps |C|·|T|.
    pub t_init: TuneBudget,
    /// Per tuner call.
    pub t_c: TuneBudget,
    /// Validation of the temporary portfolios.
    pub t_v: TuneBudget,
    /// Instance evolution; only the wall-clock form is used, the run form
    /// defers to `instance_evolution_generations`.
    pub t_i: TuneBudget,
    pub instance_evolution_generations: usize,
    pub seed: u64,
    /// Also keep the current portfolio among the candidates of each
    /// configuration round.
    #[serde(default)]
    pub elitist: bool,
    #[serde(default = "default_batch")]
    pub tune_batch_size: usize,
    /// Disables member removal so every round only adds a member; used to
    /// check the generalization bound on toy universes.
    #[doc(hidden)]
    #[serde(skip)]
    pub grow_only: bool,
}

fn default_batch() -> usize {
    16
}

impl Default for CepsSettings {
    fn default() -> Self {
        CepsSettings {
            k: 4,
            max_ite: 4,
            n: 10,
            init_sample_size: 20,
            t_init: TuneBudget::Runs(20 * 30),
            t_c: TuneBudget::Runs(200),
            t_v: TuneBudget::Runs(4 * 30),
            t_i: TuneBudget::Runs(1),
            instance_evolution_generations: 30,
            seed: 0,
            elitist: false,
            tune_batch_size: 16,
            grow_only: false,
        }
    }
}

impl CepsSettings {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1, "K must be at least 1");
        ensure!(self.n >= 1, "n must be at least 1");
        ensure!(
            self.init_sample_size >= self.k,
            "init_sample_size {} is smaller than K = {}",
            self.init_sample_size,
            self.k
        );
        ensure!(
            self.tune_batch_size >= 2,
            "tune_batch_size must be at least 2"
        );
        for b in [self.t_init, self.t_c, self.t_v, self.t_i] {
            b.validate()?;
        }
        Ok(())
    }
}

/// One member of an instance population.
#[derive(Clone, Debug)]
pub struct PoolMember<I> {
    pub instance: I,
    pub fingerprint: Fingerprint,
    /// f(s, Θ) against the portfolio the pool was last scored with.
    pub fitness: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct InstancePool<I> {
    members: Vec<PoolMember<I>>,
}

impl<I: Clone> InstancePool<I> {
    /// Builds a pool, dropping repeated fingerprints (first wins).
    pub fn new(items: impl IntoIterator<Item = (I, Fingerprint)>) -> Self {
        let mut members: Vec<PoolMember<I>> = Vec::new();
        for (instance, fingerprint) in items {
            if !members.iter().any(|m| m.fingerprint == fingerprint) {
                members.push(PoolMember {
                    instance,
                    fingerprint,
                    fitness: None,
                });
            }
        }
        InstancePool { members }
    }

    pub fn members(&self) -> &[PoolMember<I>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, fp: Fingerprint) -> bool {
        self.members.iter().any(|m| m.fingerprint == fp)
    }

    pub fn fingerprints(&self) -> Vec<Fingerprint> {
        self.members.iter().map(|m| m.fingerprint).collect()
    }

    pub fn instances(&self) -> Vec<I> {
        self.members.iter().map(|m| m.instance.clone()).collect()
    }

    pub(crate) fn push(&mut self, member: PoolMember<I>) -> bool {
        if self.contains(member.fingerprint) {
            return false;
        }
        self.members.push(member);
        true
    }

    pub(crate) fn members_mut(&mut self) -> &mut [PoolMember<I>] {
        &mut self.members
    }

    pub(crate) fn replace(&mut self, index: usize, member: PoolMember<I>) {
        self.members[index] = member;
    }
}

/// A typed record of one construction step. Together with the settings the
/// log is enough to replay a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Init {
        method: Method,
        seed: u64,
        training: Vec<Fingerprint>,
        candidates: Vec<Fingerprint>,
        members: Vec<Configuration>,
        score: Option<f64>,
    },
    TuneResult {
        round: usize,
        slot: usize,
        removed: Option<Fingerprint>,
        tune_seed: u64,
        chosen: Fingerprint,
        tune_score: f64,
        fresh_evaluations: u64,
    },
    PapSelected {
        round: usize,
        /// Index of the winning temporary portfolio; `None` when the
        /// previous portfolio was kept.
        index: Option<usize>,
        members: Vec<Configuration>,
        validation_seeds: u64,
        candidate_scores: Vec<f64>,
        score: f64,
    },
    Offspring {
        round: usize,
        generation: usize,
        parent: Fingerprint,
        child: Fingerprint,
        mutation_seed: u64,
        /// Absent when no portfolio existed yet.
        fitness: Option<f64>,
    },
    Replacement {
        round: usize,
        generation: usize,
        replaced: Fingerprint,
        replaced_fitness: Option<f64>,
        child: Fingerprint,
    },
    Merge {
        round: usize,
        pool: Vec<(Fingerprint, Option<f64>)>,
    },
}

impl AuditEvent {
    /// Every instance fingerprint the event mentions.
    pub fn instance_fingerprints(&self) -> Vec<Fingerprint> {
        match self {
            AuditEvent::Init { training, .. } => training.clone(),
            AuditEvent::Offspring { parent, child, .. } => alloc::vec![*parent, *child],
            AuditEvent::Replacement {
                replaced, child, ..
            } => alloc::vec![*replaced, *child],
            AuditEvent::Merge { pool, .. } => pool.iter().map(|p| p.0).collect(),
            AuditEvent::TuneResult { .. } | AuditEvent::PapSelected { .. } => Vec::new(),
        }
    }
}

/// Result of any construction method.
#[derive(Clone, Debug)]
pub struct Construction<I> {
    pub method: Method,
    pub portfolio: Portfolio,
    /// The greedy starting portfolio, for methods that have one.
    pub initial: Option<Portfolio>,
    /// The training pool the final portfolio was built on.
    pub pool: InstancePool<I>,
    pub audit: Vec<AuditEvent>,
}
