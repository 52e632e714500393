use std::process::Command;
use std::sync::Arc;

use ceps::harness::{evaluate_portfolio, split_train_test};
use ceps::pipeline::{construct, run_experiment, ExperimentSpec, InstanceSource};
use ceps::report::{emit_report, recompute_from_table};
use ceps::store::read_text;
use ceps::{CachedEvaluator, Error, RunCache};
use ceps_core::ceps::{CepsSettings, Method};
use ceps_core::configurator::TuneBudget;
use ceps_core::matrix::{MatrixInstance, MatrixProblem};
use ceps_core::{
    Evaluator, Fingerprint, MemoEvaluator, Portfolio, Problem, ProblemKind, RunKey, RunOutcome,
};
use proptest::prelude::*;

fn key(i: u64) -> RunKey {
    RunKey {
        config: Fingerprint::of(&format!("c{i}")),
        instance: Fingerprint::of("s"),
        seed: i,
    }
}

fn small_settings(seed: u64) -> CepsSettings {
    CepsSettings {
        k: 2,
        max_ite: 2,
        n: 3,
        init_sample_size: 6,
        t_init: TuneBudget::Runs(1000),
        t_c: TuneBudget::Runs(30),
        t_v: TuneBudget::Runs(100),
        t_i: TuneBudget::Runs(1),
        instance_evolution_generations: 4,
        seed,
        tune_batch_size: 4,
        ..Default::default()
    }
}

#[test]
fn cache_survives_reopening() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    {
        let cache = RunCache::open(&path).unwrap();
        assert!(cache
            .insert(key(1), RunOutcome::success(0.5, 3.0, 1, 1.0))
            .unwrap());
        assert!(cache.insert(key(2), RunOutcome::timeout(2, 1.0)).unwrap());
        assert!(!cache
            .insert(key(1), RunOutcome::success(0.5, 3.0, 1, 1.0))
            .unwrap());
    }
    let cache = RunCache::open(&path).unwrap();
    assert_eq!(cache.len(), 2);
    assert!(cache
        .get(&key(1))
        .unwrap()
        .bit_eq(&RunOutcome::success(0.5, 3.0, 1, 1.0)));
    assert_eq!(read_text(&path).unwrap().lines().count(), 2);
    let err = cache
        .insert(key(2), RunOutcome::success(0.1, 1.0, 2, 1.0))
        .unwrap_err();
    assert!(matches!(
        err,
        Error::Core(ceps_core::Error::CacheConflict { seed: 2, .. })
    ));
}

#[test]
fn corrupt_cache_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    std::fs::write(&path, "\nnot json\n").unwrap();
    assert!(matches!(
        RunCache::open(&path),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn evaluator_counts_each_distinct_run_once() {
    let problem = MatrixProblem::random(4, 3, 100.0, 1).unwrap();
    let ev = CachedEvaluator::new(problem.clone(), Arc::new(RunCache::in_memory()), 3).unwrap();
    let cfg = problem.solver(1);
    let inst = MatrixInstance(2);
    let job = ceps_core::Job {
        config: &cfg,
        instance: &inst,
        instance_fp: problem.fingerprint(&inst),
        seed: 0,
    };
    let scores = ev.scores(&[job, job, job]).unwrap();
    assert_eq!(scores, vec![problem.score_of(2, 1); 3]);
    assert_eq!(ev.fresh_runs(), 1);
    ev.scores(&[job]).unwrap();
    assert_eq!(ev.fresh_runs(), 1);
    ev.verify(&[job]).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn construction_ignores_worker_count(seed in 0u64..1000, workers in 2usize..6) {
        let problem = MatrixProblem::random(10, 12, 100.0, seed).unwrap();
        let training: Vec<MatrixInstance> = (0..4).map(MatrixInstance).collect();
        let settings = small_settings(seed);
        let one = CachedEvaluator::new(problem.clone(), Arc::new(RunCache::in_memory()), 1).unwrap();
        let many = CachedEvaluator::new(problem.clone(), Arc::new(RunCache::in_memory()), workers).unwrap();
        let a = construct(&one, training.clone(), Method::Ceps, &settings).unwrap();
        let b = construct(&many, training.clone(), Method::Ceps, &settings).unwrap();
        prop_assert_eq!(&a, &b);
        // and the sequential memo agrees
        let memo = MemoEvaluator::new(problem);
        let c = ceps_core::ceps::run_method(Method::Ceps, &memo, training, &settings).unwrap();
        prop_assert_eq!(&a.0.portfolio, &c.portfolio);
        prop_assert_eq!(&a.1, &c.audit);
    }
}

#[test]
fn report_files_recompute_to_the_same_score() {
    let problem = MatrixProblem::random(12, 5, 100.0, 3).unwrap();
    let ev = MemoEvaluator::new(problem.clone());
    let test: Vec<MatrixInstance> = (0..12).map(MatrixInstance).collect();
    let a = Portfolio::new(vec![problem.solver(0), problem.solver(1)]).unwrap();
    let b = Portfolio::new(vec![problem.solver(2)]).unwrap();
    let ra = evaluate_portfolio(&ev, &a, &test, 3, "ceps", None).unwrap();
    let rb = evaluate_portfolio(&ev, &b, &test, 1, "ceps.initial", None).unwrap();
    assert!(ra.score <= rb.score || ra.members != rb.members);

    let dir = tempfile::tempdir().unwrap();
    emit_report(&[ra.clone(), rb.clone()], None, dir.path()).unwrap();
    for r in [&ra, &rb] {
        let (tos, score) =
            recompute_from_table(&dir.path().join(format!("{}.csv", r.label)), 100.0).unwrap();
        assert_eq!((tos, score), (r.timeouts, r.score));
    }
    let svg = read_text(&dir.path().join("boxplot.svg")).unwrap();
    assert_eq!(svg.matches(r#"<g class="box""#).count(), 2);
    assert_eq!(svg.matches(r#"<polygon class="mean""#).count(), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&read_text(&dir.path().join("ceps.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["score"], serde_json::json!(ra.score));
    assert_eq!(summary["#TOs"], serde_json::json!(ra.timeouts));
}

#[test]
fn experiment_repeats_are_independent_splits() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        problem: ProblemKind::Tsp,
        source: InstanceSource::Generated {
            kinds: ceps_core::instgen::GeneratorKind::ALL.to_vec(),
            count: 12,
            n_cities: 8,
            seed: 4,
        },
        split_fraction: 0.25,
        repeats: 2,
        runs_per_instance: 1,
        cutoff: 0.001,
        method: Method::Ceps,
        settings: small_settings(0),
        seed: 4,
        wall_clock: false,
        workers: Some(2),
        cache: Some(dir.path().join("cache.jsonl")),
    };
    let first = run_experiment(&spec, &dir.path().join("one")).unwrap();
    let second = run_experiment(&spec, &dir.path().join("two")).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.repeats.len(), 2);
    assert!(
        first.mean_scores.contains_key("ceps") && first.mean_scores.contains_key("ceps.initial")
    );
    for r in 0..2 {
        let base = dir.path().join("one").join(format!("repeat-{r}"));
        for f in [
            "ceps.csv",
            "ceps.initial.csv",
            "boxplot.svg",
            "audit.jsonl",
            "construction/summary.json",
        ] {
            assert!(base.join(f).is_file(), "{f} missing");
        }
    }
    let items: Vec<usize> = (0..12).collect();
    let s0 = split_train_test(&items, 0.25, ceps_core::rng::derive_seed(4, &[0])).unwrap();
    let s1 = split_train_test(&items, 0.25, ceps_core::rng::derive_seed(4, &[1])).unwrap();
    assert_ne!(s0, s1);
}

fn cli(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ceps"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_budget_and_errors() {
    let (ok, out, _) = cli(&[
        "budget", "--method", "global", "--t-c", "7.5", "--t-v", "1", "--K", "4", "--n", "10",
    ]);
    assert!(ok);
    assert_eq!(out.trim(), "global: 340 h");
    let (ok, out, err) = cli(&[
        "budget", "--method", "ceps", "--t-init", "8", "--t-c", "1.5", "--t-v", "0.5", "--t-i",
        "1.5",
    ]);
    assert!(ok);
    assert_eq!(out.trim(), "ceps: 352 h");
    assert!(err.contains("warning"));
    let (ok, _, err) = cli(&[
        "evaluate",
        "--portfolio",
        "/nonexistent/p.json",
        "--test-dir",
        "/nonexistent",
    ]);
    assert!(!ok);
    assert!(err.starts_with("error:"));
}

#[test]
fn cli_generate_oracle_mutate() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("set");
    let set = out_dir.to_str().unwrap();
    assert!(
        cli(&[
            "generate",
            "--count",
            "3",
            "--n-cities",
            "9",
            "--seed",
            "5",
            "--out-dir",
            set
        ])
        .0
    );
    let (ok, out, err) = cli(&["oracle", "--dir", set, "--verify"]);
    assert!(ok, "{err}");
    assert!(!out.is_empty());
    let first = ceps::store::files_with_extension(&out_dir, "tsp")
        .unwrap()
        .remove(0);
    let child = dir.path().join("child").join("c.tsp");
    let (ok, _, err) = cli(&[
        "mutate",
        "--in",
        first.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        child.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    let parent = ceps::tsplib::read_file(&first).unwrap();
    let mutated = ceps::tsplib::read_file(&child).unwrap();
    assert_eq!(parent.len(), mutated.len());
    assert_ne!(parent.fingerprint(), mutated.fingerprint());
}
