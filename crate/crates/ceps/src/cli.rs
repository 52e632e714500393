//! The `ceps` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ceps_core::ceps::{CepsSettings, Method};
use ceps_core::clock::TimeSource;
use ceps_core::configurator::TuneBudget;
use ceps_core::instgen::GeneratorKind;
use ceps_core::tsp::{held_karp_optimum, Provenance, TspProblem, HELD_KARP_MAX_CITIES};
use ceps_core::vrp::VrpProblem;
use ceps_core::{Problem, ProblemKind};
use clap::{Args, Parser, Subcommand};

use crate::cache::RunCache;
use crate::error::{Error, Result};
use crate::evaluator::{CachedEvaluator, WallClock, WORKERS_ENV};
use crate::harness::{estimate_budget, EvaluationReport, Task};
use crate::pipeline::{
    construct, evaluate_record, generate_tsp_set, generate_vrp_set, run_experiment,
    write_construction, ConstructionRecord, ExperimentSpec,
};
use crate::report::emit_report;
use crate::store::{
    load_tsp_dir, load_vrp_dir, read_json, save_tsp_dir, save_vrp_dir, to_sorted_json, write_json,
};
use crate::tsplib;

#[derive(Debug, Parser)]
#[command(
    name = "ceps",
    version,
    about = "Parallel algorithm portfolio construction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance set.
    Generate(GenerateArgs),
    /// Mutate one instance.
    Mutate(MutateArgs),
    /// Compute or verify reference optima of a TSP instance directory.
    Oracle(OracleArgs),
    /// Build a portfolio on a training set.
    Construct(ConstructArgs),
    /// Evaluate a constructed portfolio on a test set.
    Evaluate(EvaluateArgs),
    /// Merge evaluations into one report with a shared boxplot.
    Report(ReportArgs),
    /// Estimate the CPU hours of a construction run.
    Budget(BudgetArgs),
    /// Run a whole experiment described by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct RuntimeArgs {
    /// Concurrent solver runs.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Append-only run cache file shared between invocations.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Measure run times with the wall clock instead of work units.
    #[arg(long)]
    pub wall_clock: bool,
}

impl RuntimeArgs {
    fn cache(&self) -> Result<Arc<RunCache>> {
        Ok(Arc::new(match &self.cache {
            Some(p) => RunCache::open(p)?,
            None => RunCache::in_memory(),
        }))
    }

    fn workers(&self) -> usize {
        self.workers
            .filter(|&n| n > 0)
            .unwrap_or_else(crate::evaluator::default_workers)
    }

    fn time(&self) -> TimeSource {
        if self.wall_clock {
            TimeSource::Wall(Arc::new(WallClock::default()))
        } else {
            TimeSource::WorkUnits
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "tsp")]
    pub problem: ProblemKind,
    /// Generator kinds to cycle through (TSP); all ten when omitted.
    #[arg(long = "kind")]
    pub kinds: Vec<GeneratorKind>,
    #[arg(long)]
    pub count: usize,
    /// Cities per TSP instance or customers per VRPSPDTW instance.
    #[arg(long = "n-cities")]
    pub n_cities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Cutoff used to certify TSP optima and to screen VRPSPDTW draws.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
    /// Size of the synthetic VRPSPDTW customer population.
    #[arg(long, default_value_t = 400)]
    pub population: usize,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    /// A `.tsp` or VRPSPDTW `.json` file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Cutoff used to certify the mutant's TSP optimum.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Recompute and compare against the sidecar instead of writing it.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long, default_value = "ceps")]
    pub method: Method,
    #[arg(long, default_value = "tsp")]
    pub problem: ProblemKind,
    #[arg(long = "train-dir")]
    pub train_dir: PathBuf,
    /// Portfolio size.
    #[arg(long = "K", default_value_t = 4)]
    pub k: usize,
    #[arg(long = "max-ite", default_value_t = 4)]
    pub max_ite: usize,
    /// Temporary portfolios per round.
    #[arg(long = "n-paps", default_value_t = 10)]
    pub n_paps: usize,
    /// Objective evaluations per tuner call.
    #[arg(long = "budget-runs", default_value_t = 200)]
    pub budget_runs: u64,
    /// Validation runs per round; defaults to one seed per member and instance.
    #[arg(long = "validation-runs")]
    pub validation_runs: Option<u64>,
    /// Number of sampled initial candidates.
    #[arg(long = "init-sample-size", default_value_t = 20)]
    pub init_sample_size: usize,
    /// Mutation attempts per instance-evolution phase.
    #[arg(long, default_value_t = 30)]
    pub generations: usize,
    #[arg(long = "batch-size", default_value_t = 16)]
    pub batch_size: usize,
    /// Keep the current portfolio among each round's candidates.
    #[arg(long)]
    pub elitist: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run cutoff in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
    /// Settings document replacing all of the settings flags above.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `portfolio.json` written by `construct`.
    #[arg(long)]
    pub portfolio: PathBuf,
    #[arg(long = "test-dir")]
    pub test_dir: PathBuf,
    /// Overrides the construction cutoff.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `evaluation.json` files or directories holding one.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value = "ceps")]
    pub method: Method,
    /// Hours.
    #[arg(long = "t-init", default_value_t = 0.0)]
    pub t_init: f64,
    /// Hours.
    #[arg(long = "t-c")]
    pub t_c: f64,
    /// Hours.
    #[arg(long = "t-v")]
    pub t_v: f64,
    /// Hours.
    #[arg(long = "t-i", default_value_t = 0.0)]
    pub t_i: f64,
    #[arg(long = "K", default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long = "max-ite", default_value_t = 4)]
    pub max_ite: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command, returning what to print on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate(a) => generate_cmd(&a),
        Command::Mutate(a) => mutate_cmd(&a),
        Command::Oracle(a) => oracle_cmd(&a),
        Command::Construct(a) => construct_cmd(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Report(a) => report_cmd(&a),
        Command::Budget(a) => budget_cmd(&a),
        Command::Experiment(a) => {
            let spec: ExperimentSpec = read_json(&a.spec)?;
            let summary = run_experiment(&spec, &a.out)?;
            json(&summary)
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    to_sorted_json(v).map_err(|e| Error::json(Path::new("<stdout>"), e))
}

fn generate_cmd(a: &GenerateArgs) -> Result<String> {
    match a.problem {
        ProblemKind::Tsp => {
            let kinds = if a.kinds.is_empty() {
                GeneratorKind::ALL.to_vec()
            } else {
                a.kinds.clone()
            };
            let set = generate_tsp_set(
                &kinds,
                a.count,
                a.n_cities,
                a.seed,
                &TspProblem::new(a.cutoff)?,
            )?;
            save_tsp_dir(&a.out_dir, &set)?;
            Ok(format!(
                "wrote {} TSP instances to {}",
                set.len(),
                a.out_dir.display()
            ))
        }
        ProblemKind::Vrpspdtw => {
            let set = generate_vrp_set(
                a.count,
                a.n_cities,
                a.population,
                a.seed,
                &VrpProblem::new(a.cutoff)?,
            )?;
            save_vrp_dir(&a.out_dir, &set)?;
            Ok(format!(
                "wrote {} VRPSPDTW instances to {}",
                set.len(),
                a.out_dir.display()
            ))
        }
        ProblemKind::Matrix => Err(Error::usage("nothing to generate for the matrix problem")),
    }
}

fn mutate_cmd(a: &MutateArgs) -> Result<String> {
    match a.input.extension().and_then(|e| e.to_str()) {
        Some("tsp") => {
            let problem = TspProblem::new(a.cutoff)?;
            let child = problem.mutate(&tsplib::read_file(&a.input)?, a.seed)?;
            tsplib::write_file(&a.out, &child)?;
            let dir = a
                .out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            tsplib::record_optima(dir, [&child])?;
            Ok(format!("{} {}", child.name, child.fingerprint()))
        }
        Some("json") => {
            let problem = VrpProblem::new(a.cutoff)?;
            let child = problem.mutate(&read_json(&a.input)?, a.seed)?;
            write_json(&a.out, &child)?;
            Ok(format!("{} {}", child.name, child.fingerprint()))
        }
        _ => Err(Error::usage("input must be a .tsp or .json instance")),
    }
}

fn oracle_cmd(a: &OracleArgs) -> Result<String> {
    let problem = TspProblem::new(a.cutoff)?;
    let stored = tsplib::read_optima(&a.dir)?;
    let instances = load_tsp_dir(&a.dir, None)?;
    let mut lines = Vec::new();
    let mut certified = Vec::with_capacity(instances.len());
    let mut mismatches = 0;
    for inst in instances {
        let fresh = problem.certify(&inst)?;
        let opt = fresh.reference_optimum.expect("certified");
        let old = stored.get(&inst.fingerprint());
        let tag = match (old, opt.provenance) {
            (Some(o), _) if o.value == opt.value => "ok",
            (None, _) => "new",
            // consensus values may only improve
            (Some(o), Provenance::Consensus) if opt.value > o.value => "ok",
            _ => {
                mismatches += 1;
                "MISMATCH"
            }
        };
        let kind = if inst.len() <= HELD_KARP_MAX_CITIES {
            "exact"
        } else {
            "consensus"
        };
        lines.push(format!(
            "{} {} {kind} {} {tag}",
            inst.name,
            inst.fingerprint().short(),
            opt.value
        ));
        certified.push(fresh);
    }
    if a.verify {
        if mismatches > 0 {
            return Err(Error::usage(format!(
                "{mismatches} optimum mismatch(es)\n{}",
                lines.join("\n")
            )));
        }
    } else {
        tsplib::record_optima(&a.dir, &certified)?;
    }
    Ok(lines.join("\n"))
}

fn settings_from(a: &ConstructArgs, instances: usize) -> Result<CepsSettings> {
    if let Some(path) = &a.settings {
        let mut s: CepsSettings = read_json(path)?;
        s.seed = a.seed;
        return Ok(s);
    }
    let t = instances as u64;
    Ok(CepsSettings {
        k: a.k,
        max_ite: a.max_ite,
        n: a.n_paps,
        init_sample_size: a.init_sample_size,
        t_init: TuneBudget::Runs(a.init_sample_size as u64 * t),
        t_c: TuneBudget::Runs(a.budget_runs),
        t_v: TuneBudget::Runs(a.validation_runs.unwrap_or(a.k as u64 * t)),
        t_i: TuneBudget::Runs(1),
        instance_evolution_generations: a.generations,
        seed: a.seed,
        elitist: a.elitist,
        tune_batch_size: a.batch_size,
        grow_only: false,
    })
}

fn construct_cmd(a: &ConstructArgs) -> Result<String> {
    let cache = a.runtime.cache()?;
    let workers = a.runtime.workers();
    match a.problem {
        ProblemKind::Tsp => {
            let problem = TspProblem::new(a.cutoff)?.with_time(a.runtime.time());
            let train = load_tsp_dir(&a.train_dir, Some(&problem))?;
            construct_with(a, CachedEvaluator::new(problem, cache, workers)?, train)
        }
        ProblemKind::Vrpspdtw => {
            let problem = VrpProblem::new(a.cutoff)?.with_time(a.runtime.time());
            let train = load_vrp_dir(&a.train_dir)?;
            construct_with(a, CachedEvaluator::new(problem, cache, workers)?, train)
        }
        ProblemKind::Matrix => Err(Error::usage("construct needs the tsp or vrpspdtw problem")),
    }
}

fn construct_with<P: Task>(
    a: &ConstructArgs,
    ev: CachedEvaluator<P>,
    train: Vec<P::Instance>,
) -> Result<String> {
    let settings = settings_from(a, train.len())?;
    let (record, audit) = construct(&ev, train, a.method, &settings)?;
    write_construction(&a.out, &record, &audit)?;
    json(&record.summary())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<String> {
    let record: ConstructionRecord = read_json(&a.portfolio)?;
    let cutoff = a.cutoff.unwrap_or(record.cutoff);
    let cache = a.runtime.cache()?;
    let workers = a.runtime.workers();
    let reports = match record.problem {
        ProblemKind::Tsp => {
            let problem = TspProblem::new(cutoff)?.with_time(a.runtime.time());
            let test = load_tsp_dir(&a.test_dir, Some(&problem))?;
            evaluate_record(
                &CachedEvaluator::new(problem, cache, workers)?,
                &record,
                &test,
                a.runs,
            )?
        }
        ProblemKind::Vrpspdtw => {
            let problem = VrpProblem::new(cutoff)?.with_time(a.runtime.time());
            let test = load_vrp_dir(&a.test_dir)?;
            evaluate_record(
                &CachedEvaluator::new(problem, cache, workers)?,
                &record,
                &test,
                a.runs,
            )?
        }
        ProblemKind::Matrix => {
            return Err(Error::usage("cannot evaluate matrix portfolios from files"))
        }
    };
    emit_report(&reports, None, &a.out)?;
    json(
        &reports
            .iter()
            .map(EvaluationReport::summary)
            .collect::<Vec<_>>(),
    )
}

fn report_cmd(a: &ReportArgs) -> Result<String> {
    let mut reports: Vec<EvaluationReport> = Vec::new();
    for input in &a.inputs {
        let path = if input.is_dir() {
            input.join("evaluation.json")
        } else {
            input.clone()
        };
        let batch: Vec<EvaluationReport> = read_json(&path)?;
        reports.extend(batch);
    }
    emit_report(&reports, None, &a.out)?;
    json(
        &reports
            .iter()
            .map(EvaluationReport::summary)
            .collect::<Vec<_>>(),
    )
}

fn budget_cmd(a: &BudgetArgs) -> Result<String> {
    let wall = |h: f64| TuneBudget::WallClock(h * 3600.0);
    let settings = CepsSettings {
        k: a.k,
        n: a.n,
        max_ite: a.max_ite,
        t_init: wall(a.t_init),
        t_c: wall(a.t_c),
        t_v: wall(a.t_v),
        t_i: wall(a.t_i),
        ..Default::default()
    };
    let est = estimate_budget(a.method, &settings)?;
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    Ok(format!("{}: {} h", est.method.as_str(), est.hours))
}

/// Exposed for the acceptance suite: the exact optimum of a TSP file.
pub fn exact_optimum(path: &Path) -> Result<i64> {
    Ok(held_karp_optimum(&tsplib::read_file(path)?)?)
}
