//! Instance sets, construction runs and whole experiments.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ceps_core::ceps::{run_method, AuditEvent, CepsSettings, Method};
use ceps_core::clock::TimeSource;
use ceps_core::instgen::{generate, GeneratorKind, GeneratorParams};
use ceps_core::rng::{derive_seed, tag};
use ceps_core::tsp::{TspInstance, TspProblem};
use ceps_core::vrp::{baseline_solve, SyntheticPopulation, VrpInstance, VrpProblem};
use ceps_core::{Evaluator, Fingerprint, Portfolio, Problem, ProblemKind};
use serde::{Deserialize, Serialize};

use crate::cache::RunCache;
use crate::error::{Error, Result};
use crate::evaluator::{default_workers, CachedEvaluator, WallClock};
use crate::harness::{
    check_leakage, evaluate_portfolio, split_train_test, ConstructionInfo, EvaluationReport, Task,
};
use crate::report::emit_report;
use crate::store::{load_tsp_dir, load_vrp_dir, write_audit, write_json};

/// `count` certified TSP instances cycling through `kinds`. Clustered
/// instances cycle through 4 to 8 clusters.
pub fn generate_tsp_set(
    kinds: &[GeneratorKind],
    count: usize,
    n_cities: usize,
    seed: u64,
    problem: &TspProblem,
) -> Result<Vec<TspInstance>> {
    if kinds.is_empty() {
        return Err(Error::usage("no generator kinds given"));
    }
    (0..count)
        .map(|i| {
            let kind = kinds[i % kinds.len()];
            let mut params = GeneratorParams::with_cities(n_cities);
            params.n_clusters = 4 + (i / kinds.len()) % 5;
            let mut inst = generate(
                kind,
                &params,
                derive_seed(seed, &[tag("tsp-set"), i as u64]),
            )?;
            inst.name = format!("{}-n{n_cities}-{i:04}", kind.as_str());
            Ok(problem.certify(&inst)?)
        })
        .collect()
}

/// `count` VRPSPDTW instances drawn from one synthetic customer population.
/// Draws that the default solver cannot solve within ten cutoffs are
/// discarded; gives up after `10 * count` draws.
pub fn generate_vrp_set(
    count: usize,
    n_customers: usize,
    population: usize,
    seed: u64,
    problem: &VrpProblem,
) -> Result<Vec<VrpInstance>> {
    let pop = SyntheticPopulation::generate(population, seed)?;
    let screen = problem.space().default_configuration();
    let mut out = Vec::with_capacity(count);
    for draw in 0..10 * count.max(1) as u64 {
        if out.len() == count {
            break;
        }
        let mut inst =
            pop.sample_instance(n_customers, derive_seed(seed, &[tag("vrp-set"), draw]))?;
        let outcome = baseline_solve(
            &inst,
            &screen,
            0,
            10.0 * problem.cutoff,
            &TimeSource::WorkUnits,
        )?;
        if outcome.is_success() {
            inst.name = format!("vrp-n{n_customers}-{:04}", out.len());
            out.push(inst);
        }
    }
    if out.len() < count {
        return Err(Error::usage(format!(
            "only {} of {count} sampled instances were solvable",
            out.len()
        )));
    }
    Ok(out)
}

/// Everything needed to evaluate or replay a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub problem: ProblemKind,
    pub method: Method,
    pub cutoff: f64,
    pub settings: CepsSettings,
    pub portfolio: Portfolio,
    pub initial: Option<Portfolio>,
    pub training: Vec<Fingerprint>,
    pub pool: Vec<Fingerprint>,
    /// Score of the final portfolio on the final training pool, when the
    /// method validated one.
    pub training_score: Option<f64>,
}

impl ConstructionRecord {
    pub fn info(&self) -> ConstructionInfo {
        ConstructionInfo::new(self.method, &self.settings)
    }

    pub fn summary(&self) -> serde_json::Value {
        let hex = |p: &Portfolio| {
            p.fingerprints()
                .iter()
                .map(Fingerprint::to_hex)
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "method": self.method.as_str(),
            "problem": self.problem.as_str(),
            "K": self.settings.k,
            "MaxIte": self.settings.max_ite,
            "n": self.settings.n,
            "seed": self.settings.seed,
            "cutoff": self.cutoff,
            "portfolio": hex(&self.portfolio),
            "initial": self.initial.as_ref().map(hex),
            "training": self.training.len(),
            "pool": self.pool.len(),
            "training_score": self.training_score,
        })
    }
}

/// Runs a construction method and returns its record and audit log.
pub fn construct<P: Task>(
    evaluator: &CachedEvaluator<P>,
    training: Vec<P::Instance>,
    method: Method,
    settings: &CepsSettings,
) -> Result<(ConstructionRecord, Vec<AuditEvent>)> {
    let problem = evaluator.problem();
    let fps = training.iter().map(|s| problem.fingerprint(s)).collect();
    let built = run_method(method, evaluator, training, settings)?;
    let training_score = built.audit.iter().rev().find_map(|e| match e {
        AuditEvent::PapSelected { score, .. } => Some(*score),
        AuditEvent::Init { score, .. } => *score,
        _ => None,
    });
    let record = ConstructionRecord {
        problem: problem.kind(),
        method: built.method,
        cutoff: problem.cutoff(),
        settings: settings.clone(),
        portfolio: built.portfolio,
        initial: built.initial,
        training: fps,
        pool: built.pool.fingerprints(),
        training_score,
    };
    Ok((record, built.audit))
}

/// Writes `portfolio.json`, `audit.jsonl` and `summary.json`.
pub fn write_construction(
    out: &Path,
    record: &ConstructionRecord,
    audit: &[AuditEvent],
) -> Result<()> {
    write_json(&out.join("portfolio.json"), record)?;
    write_audit(&out.join("audit.jsonl"), audit)?;
    write_json(&out.join("summary.json"), &record.summary())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    /// TSP instances from the built-in generators.
    Generated {
        #[serde(default = "all_kinds")]
        kinds: Vec<GeneratorKind>,
        count: usize,
        n_cities: usize,
        seed: u64,
    },
    /// VRPSPDTW instances sampled from a synthetic customer population.
    Synthetic {
        count: usize,
        n_customers: usize,
        population: usize,
        seed: u64,
    },
    /// `*.tsp` files (with `optima.json`) or VRPSPDTW `*.json` files.
    Directory { dir: PathBuf },
}

fn all_kinds() -> Vec<GeneratorKind> {
    GeneratorKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub source: InstanceSource,
    /// Training share of each split.
    pub split_fraction: f64,
    /// Number of split re-draws.
    pub repeats: usize,
    pub runs_per_instance: usize,
    pub cutoff: f64,
    pub method: Method,
    pub settings: CepsSettings,
    pub seed: u64,
    /// Measure runs with the wall clock instead of work units.
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Persistent run cache shared by all repeats.
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::usage("split_fraction must lie in (0, 1)"));
        }
        if self.runs_per_instance % 2 == 0 {
            return Err(Error::usage("runs_per_instance must be odd"));
        }
        if self.repeats == 0 {
            return Err(Error::usage("repeats must be at least 1"));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::usage("cutoff must be positive"));
        }
        let ok = matches!(
            (self.problem, &self.source),
            (ProblemKind::Tsp, InstanceSource::Generated { .. })
                | (ProblemKind::Vrpspdtw, InstanceSource::Synthetic { .. })
                | (
                    ProblemKind::Tsp | ProblemKind::Vrpspdtw,
                    InstanceSource::Directory { .. }
                )
        );
        if !ok {
            return Err(Error::usage(format!(
                "instance source does not fit problem {}",
                self.problem.as_str()
            )));
        }
        self.settings.validate()?;
        Ok(())
    }

    fn time(&self) -> TimeSource {
        if self.wall_clock {
            TimeSource::Wall(Arc::new(WallClock::default()))
        } else {
            TimeSource::WorkUnits
        }
    }

    fn cache(&self) -> Result<Arc<RunCache>> {
        Ok(Arc::new(match &self.cache {
            Some(p) => RunCache::open(p)?,
            None => RunCache::in_memory(),
        }))
    }
}

/// Per-repeat summaries plus the mean score of every label over repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub repeats: Vec<Vec<serde_json::Value>>,
    pub mean_scores: std::collections::BTreeMap<String, f64>,
}

/// For each repeat: split, construct on the training part, check the audit
/// log for leakage, evaluate the final (and initial) portfolio on the test
/// part and emit the reports under `out/repeat-<r>/`.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExperimentSummary> {
    spec.validate()?;
    let cache = spec.cache()?;
    let workers = spec.workers.unwrap_or_else(default_workers);
    let summary = match spec.problem {
        ProblemKind::Tsp => {
            let problem = TspProblem::new(spec.cutoff)?.with_time(spec.time());
            let instances = match &spec.source {
                InstanceSource::Generated {
                    kinds,
                    count,
                    n_cities,
                    seed,
                } => generate_tsp_set(kinds, *count, *n_cities, *seed, &problem)?,
                InstanceSource::Directory { dir } => load_tsp_dir(dir, Some(&problem))?,
                InstanceSource::Synthetic { .. } => unreachable!("validated"),
            };
            experiment_with(
                spec,
                CachedEvaluator::new(problem, cache, workers)?,
                &instances,
                out,
            )?
        }
        ProblemKind::Vrpspdtw => {
            let problem = VrpProblem::new(spec.cutoff)?.with_time(spec.time());
            let instances = match &spec.source {
                InstanceSource::Synthetic {
                    count,
                    n_customers,
                    population,
                    seed,
                } => generate_vrp_set(*count, *n_customers, *population, *seed, &problem)?,
                InstanceSource::Directory { dir } => load_vrp_dir(dir)?,
                InstanceSource::Generated { .. } => unreachable!("validated"),
            };
            experiment_with(
                spec,
                CachedEvaluator::new(problem, cache, workers)?,
                &instances,
                out,
            )?
        }
        ProblemKind::Matrix => {
            return Err(Error::usage("experiments need the tsp or vrpspdtw problem"))
        }
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn experiment_with<P: Task>(
    spec: &ExperimentSpec,
    evaluator: CachedEvaluator<P>,
    instances: &[P::Instance],
    out: &Path,
) -> Result<ExperimentSummary> {
    let mut repeats = Vec::with_capacity(spec.repeats);
    let mut totals: std::collections::BTreeMap<String, f64> = Default::default();
    for r in 0..spec.repeats {
        let dir = out.join(format!("repeat-{r}"));
        let (train, test) = split_train_test(
            instances,
            spec.split_fraction,
            derive_seed(spec.seed, &[r as u64]),
        )?;
        let mut settings = spec.settings.clone();
        settings.seed = derive_seed(spec.seed, &[tag("construct"), r as u64]);
        let (record, audit) = construct(&evaluator, train, spec.method, &settings)?;
        let test_fps: Vec<Fingerprint> = test
            .iter()
            .map(|s| evaluator.problem().fingerprint(s))
            .collect();
        check_leakage(&audit, &test_fps)?;
        write_construction(&dir.join("construction"), &record, &audit)?;
        let reports = evaluate_record(&evaluator, &record, &test, spec.runs_per_instance)?;
        emit_report(&reports, Some(&audit), &dir)?;
        for rep in &reports {
            *totals.entry(rep.label.clone()).or_default() += rep.score;
        }
        repeats.push(reports.iter().map(EvaluationReport::summary).collect());
    }
    let mean_scores = totals
        .into_iter()
        .map(|(k, v)| (k, v / spec.repeats as f64))
        .collect();
    Ok(ExperimentSummary {
        repeats,
        mean_scores,
    })
}

/// Evaluates the final portfolio and, when the method has one, the initial
/// portfolio (labelled `<method>.initial`).
pub fn evaluate_record<P: Task>(
    evaluator: &CachedEvaluator<P>,
    record: &ConstructionRecord,
    test: &[P::Instance],
    runs: usize,
) -> Result<Vec<EvaluationReport>> {
    let info = record.info();
    let mut reports = vec![evaluate_portfolio(
        evaluator,
        &record.portfolio,
        test,
        runs,
        record.method.as_str(),
        Some(info.clone()),
    )?];
    if let Some(initial) = record
        .initial
        .as_ref()
        .filter(|_| record.method != Method::Initial)
    {
        let label = format!("{}.initial", record.method.as_str());
        reports.push(evaluate_portfolio(
            evaluator,
            initial,
            test,
            runs,
            &label,
            Some(info),
        )?);
    }
    Ok(reports)
}
