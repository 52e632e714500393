use ceps_core::ceps::{
    evolve_configs, evolve_instances, greedy_init, greedy_select, run_baseline, run_ceps,
    AuditEvent, CepsSettings, CompletionObjective, InstancePool, Method,
};
use ceps_core::configurator::{tune, TuneBudget, TuneOptions};
use ceps_core::matrix::{MatrixInstance, MatrixProblem};
use ceps_core::{Evaluator, MemoEvaluator, Portfolio, Problem};
use proptest::prelude::*;

fn pool(problem: &MatrixProblem, idx: &[usize]) -> InstancePool<MatrixInstance> {
    InstancePool::new(
        idx.iter()
            .map(|&i| (MatrixInstance(i), problem.fingerprint(&MatrixInstance(i)))),
    )
}

fn settings(k: usize, max_ite: usize, n: usize) -> CepsSettings {
    CepsSettings {
        k,
        max_ite,
        n,
        init_sample_size: 6,
        t_init: TuneBudget::Runs(1000),
        t_c: TuneBudget::Runs(40),
        t_v: TuneBudget::Runs(1000),
        t_i: TuneBudget::Runs(1),
        instance_evolution_generations: 6,
        seed: 3,
        elitist: false,
        tune_batch_size: 4,
        grow_only: false,
    }
}

/// Transposes `rows[solver][instance]` into the matrix problem's layout.
fn problem_from_columns(cols: &[Vec<f64>], penalty: f64) -> MatrixProblem {
    let instances = cols[0].len();
    let scores = (0..instances)
        .map(|s| cols.iter().map(|c| c[s]).collect())
        .collect();
    MatrixProblem::new(scores, penalty).unwrap()
}

#[test]
fn greedy_picks_the_middle_then_breaks_the_tie_by_order() {
    let m = vec![vec![1.0, 100.0], vec![100.0, 1.0], vec![50.0, 50.0]];
    assert_eq!(greedy_select(&m, 2).unwrap(), vec![2, 0]);
    // the exhaustive optimum differs
    let best_pair = [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .min_by(|a, b| {
            let score =
                |&(x, y): &(usize, usize)| (m[x][0].min(m[y][0]) + m[x][1].min(m[y][1])) / 2.0;
            score(a).total_cmp(&score(b))
        })
        .unwrap();
    assert_eq!(best_pair, (0, 1));
}

#[test]
fn greedy_single_pick_and_dominance() {
    let m = vec![
        vec![3.0, 4.0],
        vec![2.0, 6.0],
        vec![1.0, 1.0],
        vec![9.0, 0.5],
    ];
    assert_eq!(greedy_select(&m, 1).unwrap(), vec![2]);
    assert_eq!(greedy_select(&m[..3], 3).unwrap()[0], 2);
    assert!(greedy_select(&m, 5).is_err());
}

#[test]
fn greedy_init_uses_seed_zero_runs() {
    let problem = problem_from_columns(
        &[vec![1.0, 100.0], vec![100.0, 1.0], vec![50.0, 50.0]],
        1000.0,
    );
    let ev = MemoEvaluator::new(problem.clone());
    let candidates: Vec<_> = (0..3).map(|j| problem.solver(j)).collect();
    let (p, score) = greedy_init(&ev, &candidates, &pool(&problem, &[0, 1]), 2).unwrap();
    assert_eq!(p.members(), &[problem.solver(2), problem.solver(0)]);
    assert_eq!(score, 25.5);
    assert_eq!(ev.fresh_runs(), 6);
    let dupes = vec![problem.solver(0), problem.solver(0)];
    assert!(greedy_init(&ev, &dupes, &pool(&problem, &[0, 1]), 2).is_err());
}

#[test]
fn configuration_round_selects_the_best_temporary_portfolio() {
    let problem = MatrixProblem::random(16, 8, 100.0, 5).unwrap();
    let ev = MemoEvaluator::new(problem.clone());
    let training = pool(&problem, &[0, 1, 2, 3, 4, 5]);
    let start = Portfolio::new(vec![problem.solver(0), problem.solver(1)]).unwrap();
    let mut audit = Vec::new();
    let next = evolve_configs(&ev, &start, &training, &settings(2, 1, 3), 1, &mut audit).unwrap();
    assert_eq!(next.len(), 2);
    let Some(AuditEvent::PapSelected {
        candidate_scores,
        score,
        index,
        ..
    }) = audit.last()
    else {
        panic!("missing selection event")
    };
    let min = candidate_scores
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert_eq!(*score, min);
    assert_eq!(candidate_scores.iter().position(|s| *s == min), *index);
    assert_eq!(
        audit
            .iter()
            .filter(|e| matches!(e, AuditEvent::TuneResult { .. }))
            .count(),
        3
    );
}

#[test]
fn configuration_round_finds_the_repairing_member() {
    // c0 covers s0 and s1, c1 covers s2, c3 covers s2 and s3; only c3
    // repairs both holes left next to c0
    let cols = vec![
        vec![1.0, 1.0, 90.0, 90.0],
        vec![90.0, 90.0, 1.0, 90.0],
        vec![90.0, 90.0, 90.0, 90.0],
        vec![90.0, 90.0, 1.0, 1.0],
    ];
    let problem = problem_from_columns(&cols, 100.0);
    let ev = MemoEvaluator::new(problem.clone());
    let training = pool(&problem, &[0, 1, 2, 3]);
    let start = Portfolio::new(vec![problem.solver(0), problem.solver(1)]).unwrap();
    let mut s = settings(2, 1, 4);
    s.t_c = TuneBudget::Runs(100);
    let next = evolve_configs(&ev, &start, &training, &s, 1, &mut Vec::new()).unwrap();
    let mut got = next.fingerprints();
    got.sort();
    let mut want = vec![
        problem.solver(0).fingerprint(),
        problem.solver(3).fingerprint(),
    ];
    want.sort();
    assert_eq!(got, want);
}

/// Universe where instance 0 scores 5, instance 1 scores 3 and every other
/// instance scores `other` for the single solver.
fn strict_lower_universe(other: f64) -> MatrixProblem {
    let mut col = vec![5.0, 3.0];
    col.extend(std::iter::repeat(other).take(30));
    problem_from_columns(&[col], 100.0)
}

fn one_generation(
    problem: &MatrixProblem,
    seed: u64,
) -> (InstancePool<MatrixInstance>, Vec<AuditEvent>) {
    let ev = MemoEvaluator::new(problem.clone());
    let p = Portfolio::new(vec![problem.solver(0)]).unwrap();
    let mut s = settings(1, 2, 1);
    s.instance_evolution_generations = 1;
    s.seed = seed;
    let mut audit = Vec::new();
    let out = evolve_instances(&ev, &pool(problem, &[0, 1]), &p, &s, 1, &mut audit).unwrap();
    (out, audit)
}

#[test]
fn offspring_replaces_only_strictly_lower_members() {
    let problem = strict_lower_universe(4.0);
    let mut replaced_any = false;
    for seed in 0..20 {
        let (out, audit) = one_generation(&problem, seed);
        let replacements: Vec<_> = audit
            .iter()
            .filter_map(|e| match e {
                AuditEvent::Replacement {
                    replaced,
                    replaced_fitness,
                    ..
                } => Some((*replaced, *replaced_fitness)),
                _ => None,
            })
            .collect();
        for (fp, f) in &replacements {
            assert_eq!(*fp, problem.fingerprint(&MatrixInstance(1)));
            assert_eq!(*f, Some(3.0));
            replaced_any = true;
        }
        // original pool first, then whatever the evolved copy added
        assert_eq!(
            out.members()[0].fingerprint,
            problem.fingerprint(&MatrixInstance(0))
        );
        assert_eq!(
            out.members()[1].fingerprint,
            problem.fingerprint(&MatrixInstance(1))
        );
        assert_eq!(out.len(), 2 + replacements.len());
    }
    assert!(replaced_any);
}

#[test]
fn weaker_offspring_is_discarded() {
    let problem = strict_lower_universe(2.0);
    for seed in 0..10 {
        let (out, audit) = one_generation(&problem, seed);
        assert!(!audit
            .iter()
            .any(|e| matches!(e, AuditEvent::Replacement { .. })));
        assert_eq!(out.len(), 2);
    }
}

#[test]
fn timeout_offspring_always_enters() {
    let problem = strict_lower_universe(100.0);
    for seed in 0..10 {
        let (_, audit) = one_generation(&problem, seed);
        let offspring_fp = audit.iter().find_map(|e| match e {
            AuditEvent::Offspring { child, .. } => Some(*child),
            _ => None,
        });
        let duplicate = [0, 1]
            .iter()
            .any(|&i| Some(problem.fingerprint(&MatrixInstance(i))) == offspring_fp);
        let entered = audit
            .iter()
            .any(|e| matches!(e, AuditEvent::Replacement { .. }));
        assert_eq!(entered, !duplicate);
    }
}

#[test]
fn single_round_has_no_instance_evolution_and_pools_stay_bounded() {
    let problem = MatrixProblem::random(40, 6, 100.0, 11).unwrap();
    let t0 = [0usize, 1, 2].map(MatrixInstance).to_vec();
    let one = run_ceps(
        &MemoEvaluator::new(problem.clone()),
        t0.clone(),
        &settings(2, 1, 2),
    )
    .unwrap();
    assert!(!one
        .audit
        .iter()
        .any(|e| matches!(e, AuditEvent::Offspring { .. })));
    assert_eq!(one.pool.len(), 3);
    let three = run_ceps(&MemoEvaluator::new(problem), t0, &settings(2, 3, 2)).unwrap();
    let mut merges = 0;
    for e in &three.audit {
        if let AuditEvent::Merge { round, pool } = e {
            merges += 1;
            assert!(pool.len() <= (1 << round) * 3);
        }
    }
    assert_eq!(merges, 2);
}

#[test]
fn zero_rounds_is_the_initial_portfolio() {
    let problem = MatrixProblem::random(20, 6, 100.0, 2).unwrap();
    let t0 = [0usize, 1, 2, 3].map(MatrixInstance).to_vec();
    let s = settings(2, 0, 2);
    let ceps = run_ceps(&MemoEvaluator::new(problem.clone()), t0.clone(), &s).unwrap();
    let init = run_baseline(Method::Initial, &MemoEvaluator::new(problem), t0, &s).unwrap();
    assert_eq!(ceps.portfolio, init.portfolio);
    assert_eq!(ceps.method, Method::Initial);
}

#[test]
fn parhydra_with_one_slot_is_a_single_tuner_call() {
    let problem = MatrixProblem::random(12, 8, 100.0, 9).unwrap();
    let t0: Vec<_> = (0..4).map(MatrixInstance).collect();
    let s = settings(1, 1, 1);
    let built = run_baseline(
        Method::Parhydra,
        &MemoEvaluator::new(problem.clone()),
        t0.clone(),
        &s,
    )
    .unwrap();
    let ev = MemoEvaluator::new(problem.clone());
    let training = pool(&problem, &[0, 1, 2, 3]);
    let objective = CompletionObjective::new(&ev, training.members(), &[]);
    let tune_seed = match built
        .audit
        .iter()
        .find(|e| matches!(e, AuditEvent::TuneResult { .. }))
    {
        Some(AuditEvent::TuneResult { tune_seed, .. }) => *tune_seed,
        _ => panic!("no tune event"),
    };
    let opts = TuneOptions {
        batch_size: s.tune_batch_size,
        ..Default::default()
    };
    let direct = tune(problem.space(), &objective, s.t_c, tune_seed, &opts).unwrap();
    assert_eq!(built.portfolio.members(), &[direct.best]);
}

#[test]
fn global_beats_every_single_configuration_on_complementary_matrices() {
    let cols = vec![
        vec![1.0, 80.0, 1.0, 80.0],
        vec![80.0, 1.0, 80.0, 1.0],
        vec![40.0, 40.0, 40.0, 40.0],
        vec![60.0, 60.0, 30.0, 30.0],
    ];
    let problem = problem_from_columns(&cols, 100.0);
    let mut s = settings(2, 1, 10);
    s.t_c = TuneBudget::Runs(40);
    let t0: Vec<_> = (0..4).map(MatrixInstance).collect();
    let built = run_baseline(Method::Global, &MemoEvaluator::new(problem.clone()), t0, &s).unwrap();
    let score = |members: &[usize]| {
        (0..4)
            .map(|i| {
                members
                    .iter()
                    .map(|&m| cols[m][i])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / 4.0
    };
    let chosen: Vec<usize> = built
        .portfolio
        .members()
        .iter()
        .map(|c| problem.solver_index(c).unwrap())
        .collect();
    let best_single = (0..4).map(|j| score(&[j])).fold(f64::INFINITY, f64::min);
    assert!(score(&chosen) <= best_single);
}

#[test]
fn eps_grows_the_pool_before_construction() {
    let problem = MatrixProblem::random(64, 6, 100.0, 4).unwrap();
    let t0: Vec<_> = (0..3).map(MatrixInstance).collect();
    let s = settings(2, 3, 2);
    let built = run_baseline(Method::Eps, &MemoEvaluator::new(problem), t0, &s).unwrap();
    let attempts = built
        .audit
        .iter()
        .filter(|e| matches!(e, AuditEvent::Offspring { .. }))
        .count();
    assert_eq!(attempts, 2 * s.instance_evolution_generations);
    assert!(built.pool.len() > 3 && built.pool.len() <= 3 + attempts);
    let rounds = built
        .audit
        .iter()
        .filter(|e| matches!(e, AuditEvent::PapSelected { .. }))
        .count();
    assert_eq!(rounds, 3);
}

#[test]
fn elitist_flag_never_loses_training_score() {
    let problem = MatrixProblem::random(16, 8, 100.0, 21).unwrap();
    let ev = MemoEvaluator::new(problem.clone());
    let training = pool(&problem, &[0, 1, 2, 3, 4]);
    let start = Portfolio::new(vec![problem.solver(2), problem.solver(5)]).unwrap();
    let mut s = settings(2, 1, 2);
    s.elitist = true;
    let mut audit = Vec::new();
    evolve_configs(&ev, &start, &training, &s, 1, &mut audit).unwrap();
    let Some(AuditEvent::PapSelected {
        candidate_scores,
        score,
        ..
    }) = audit.last()
    else {
        panic!()
    };
    assert_eq!(candidate_scores.len(), 3);
    assert!(*score <= candidate_scores[2]);
}

#[test]
fn runs_replay_identically() {
    let problem = MatrixProblem::random(30, 8, 100.0, 13).unwrap();
    let t0: Vec<_> = (0..4).map(MatrixInstance).collect();
    let s = settings(3, 3, 3);
    let a = run_ceps(&MemoEvaluator::new(problem.clone()), t0.clone(), &s).unwrap();
    let b = run_ceps(&MemoEvaluator::new(problem), t0, &s).unwrap();
    assert_eq!(a.audit, b.audit);
    assert_eq!(a.portfolio, b.portfolio);
    assert_eq!(a.pool.fingerprints(), b.pool.fingerprints());
}

#[test]
fn construction_rejects_bad_settings() {
    let problem = MatrixProblem::random(8, 3, 100.0, 1).unwrap();
    let ev = MemoEvaluator::new(problem);
    let mut s = settings(2, 1, 1);
    s.t_c = TuneBudget::Runs(0);
    assert!(run_ceps(&ev, vec![MatrixInstance(0)], &s).is_err());
    assert!(run_ceps(&ev, vec![], &settings(2, 1, 1)).is_err());
    let mut s = settings(2, 1, 1);
    s.t_init = TuneBudget::Runs(1);
    assert!(run_ceps(&ev, vec![MatrixInstance(0), MatrixInstance(1)], &s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replacements_never_lower_pool_fitness(seed in any::<u64>(), matrix_seed in 0u64..1000) {
        let problem = MatrixProblem::random(32, 4, 100.0, matrix_seed).unwrap();
        let ev = MemoEvaluator::new(problem.clone());
        let p = Portfolio::new(vec![problem.solver(0), problem.solver(1)]).unwrap();
        let mut s = settings(2, 2, 1);
        s.seed = seed;
        s.instance_evolution_generations = 20;
        let mut audit = Vec::new();
        let out = evolve_instances(&ev, &pool(&problem, &[0, 1, 2, 3]), &p, &s, 1, &mut audit).unwrap();
        for e in &audit {
            if let AuditEvent::Replacement { replaced_fitness, child, generation, .. } = e {
                let child_fitness = audit.iter().find_map(|o| match o {
                    AuditEvent::Offspring { child: c, generation: g, fitness, .. } if c == child && g == generation => *fitness,
                    _ => None,
                }).unwrap();
                prop_assert!(replaced_fitness.unwrap() < child_fitness);
            }
        }
        // every label matches a fresh evaluation against the portfolio
        for m in out.members() {
            let fresh = p.members().iter()
                .map(|c| problem.score_of(m.instance.0, problem.solver_index(c).unwrap()))
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(m.fitness, Some(fresh));
        }
        let mut fps = out.fingerprints();
        fps.sort();
        fps.dedup();
        prop_assert_eq!(fps.len(), out.len());
    }
}
