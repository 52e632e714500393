//! Ruin-and-recreate search with configurable insertion and local moves.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::clock::{Stopwatch, TimeSource};
use crate::error::{ensure, Result};
use crate::outcome::RunOutcome;
use crate::params::{Configuration, Domain, Parameter, ParameterSpace, Value};
use crate::rng::{derive_seed, rng_from, tag, SeededRng};

use super::instance::{evaluate_solution, VrpInstance, VrpSolution};

pub fn vrp_space() -> ParameterSpace {
    ParameterSpace::new(
        "vrp-rr",
        vec![
            Parameter::new(
                "insertion_criterion",
                Domain::choices(&["cheapest", "regret2", "regret3"]),
                Value::cat("regret2"),
            ),
            Parameter::new(
                "distance_weight",
                Domain::Real { lo: 0.0, hi: 1.0 },
                Value::Real(0.7),
            ),
            Parameter::new(
                "ruin_fraction",
                Domain::Real { lo: 0.05, hi: 0.3 },
                Value::Real(0.15),
            ),
            Parameter::new("relocate", Domain::boolean(), Value::cat("true")),
            Parameter::new("swap", Domain::boolean(), Value::cat("true")),
            Parameter::new("two_opt_star", Domain::boolean(), Value::cat("true")),
            Parameter::new(
                "restart_patience",
                Domain::Integer { lo: 5, hi: 200 },
                Value::Int(50),
            ),
        ],
    )
    .expect("static space is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insertion {
    Cheapest,
    /// Regret over the best `k` routes.
    Regret(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VrpParams {
    pub insertion: Insertion,
    /// Weight of added cost against added route duration when ranking
    /// insertions.
    pub distance_weight: f64,
    pub ruin_fraction: f64,
    pub relocate: bool,
    pub swap: bool,
    pub two_opt_star: bool,
    pub restart_patience: usize,
}

impl VrpParams {
    pub fn from_config(config: &Configuration) -> Result<Self> {
        vrp_space().validate(config)?;
        Ok(VrpParams {
            insertion: match config.cat("insertion_criterion")? {
                "cheapest" => Insertion::Cheapest,
                "regret2" => Insertion::Regret(2),
                _ => Insertion::Regret(3),
            },
            distance_weight: config.real("distance_weight")?,
            ruin_fraction: config.real("ruin_fraction")?,
            relocate: config.flag("relocate")?,
            swap: config.flag("swap")?,
            two_opt_star: config.flag("two_opt_star")?,
            restart_patience: config.int("restart_patience")? as usize,
        })
    }
}

/// Runs the solver until `cutoff` and reports the best feasible cost found.
/// Provably infeasible instances are reported as such immediately.
pub fn baseline_solve(
    instance: &VrpInstance,
    config: &Configuration,
    seed: u64,
    cutoff: f64,
    time: &TimeSource,
) -> Result<RunOutcome> {
    Ok(solve_with_solution(instance, config, seed, cutoff, time)?.0)
}

/// [`baseline_solve`] that also returns the reported solution.
pub fn solve_with_solution(
    instance: &VrpInstance,
    config: &Configuration,
    seed: u64,
    cutoff: f64,
    time: &TimeSource,
) -> Result<(RunOutcome, Option<VrpSolution>)> {
    ensure!(
        cutoff > 0.0 && cutoff.is_finite(),
        "cutoff must be positive, got {cutoff}"
    );
    let params = VrpParams::from_config(config)?;
    instance.validate()?;
    if instance.provably_infeasible() {
        return Ok((RunOutcome::infeasible(0.0, seed, cutoff), None));
    }
    let mut search = Search::new(instance, params, seed, Stopwatch::new(time, cutoff));
    let best = search.run();
    match best {
        Some((state, found_at)) if state.unassigned.is_empty() => {
            let solution = VrpSolution::new(state.routes);
            let eval = evaluate_solution(instance, &solution)?;
            if eval.is_feasible() {
                Ok((
                    RunOutcome::success(found_at.min(cutoff), eval.cost, seed, cutoff),
                    Some(solution),
                ))
            } else {
                Ok((RunOutcome::timeout(seed, cutoff), None))
            }
        }
        _ => Ok((RunOutcome::timeout(seed, cutoff), None)),
    }
}

const EPS: f64 = 1e-9;
/// Regret contribution of a missing insertion option.
const MISSING: f64 = 1e12;

#[derive(Clone, Debug)]
struct State {
    routes: Vec<Vec<usize>>,
    /// Cost of each route, parallel to `routes`.
    costs: Vec<f64>,
    durations: Vec<f64>,
    unassigned: Vec<usize>,
}

impl State {
    fn cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    fn better_than(&self, other: &State) -> bool {
        match self.unassigned.len().cmp(&other.unassigned.len()) {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => self.cost() < other.cost() - EPS,
        }
    }

    fn set_route(&mut self, r: usize, route: Vec<usize>, eval: (f64, f64)) {
        self.routes[r] = route;
        self.costs[r] = eval.0;
        self.durations[r] = eval.1;
    }

    fn drop_empty(&mut self) {
        let mut r = 0;
        while r < self.routes.len() {
            if self.routes[r].is_empty() {
                self.routes.remove(r);
                self.costs.remove(r);
                self.durations.remove(r);
            } else {
                r += 1;
            }
        }
    }
}

struct Search<'a> {
    inst: &'a VrpInstance,
    dist: Vec<f64>,
    nodes: usize,
    params: VrpParams,
    rng: SeededRng,
    sw: Stopwatch,
}

impl<'a> Search<'a> {
    fn new(inst: &'a VrpInstance, params: VrpParams, seed: u64, mut sw: Stopwatch) -> Self {
        let nodes = inst.len() + 1;
        let mut dist = vec![0.0; nodes * nodes];
        for i in 0..nodes {
            for j in 0..nodes {
                dist[i * nodes + j] = inst.dist(i, j);
            }
        }
        sw.charge((nodes * nodes / 2) as u64);
        Search {
            inst,
            dist,
            nodes,
            params,
            rng: rng_from(derive_seed(seed, &[tag("vrp-solve")])),
            sw,
        }
    }

    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.nodes + b]
    }

    /// (cost, duration) of a feasible route, `None` if it breaks a
    /// constraint. An empty route costs nothing.
    fn check(&mut self, route: &[usize]) -> Option<(f64, f64)> {
        self.sw.charge(route.len() as u64 + 1);
        if route.is_empty() {
            return Some((0.0, 0.0));
        }
        let inst = self.inst;
        let mut load: f64 = route.iter().map(|&c| inst.customer(c).delivery).sum();
        let q = inst.fleet.capacity;
        if load > q {
            return None;
        }
        let mut time = inst.depot.a;
        let mut travel = 0.0;
        let mut prev = 0;
        for &c in route {
            let cust = inst.customer(c);
            let leg = self.d(prev, c);
            travel += leg;
            let arr = time + leg;
            if arr > cust.b {
                return None;
            }
            load += cust.pickup - cust.delivery;
            if load > q {
                return None;
            }
            time = arr.max(cust.a) + cust.service;
            prev = c;
        }
        let leg = self.d(prev, 0);
        travel += leg;
        let ret = time + leg;
        if ret > inst.depot.b {
            return None;
        }
        Some((
            inst.fleet.dispatch_cost + travel * inst.fleet.unit_cost,
            ret - inst.depot.a,
        ))
    }

    fn run(&mut self) -> Option<(State, f64)> {
        let n = self.inst.len();
        let mut current = State {
            routes: Vec::new(),
            costs: Vec::new(),
            durations: Vec::new(),
            unassigned: (1..=n).collect(),
        };
        self.recreate(&mut current);
        self.local_search(&mut current);
        if self.sw.expired() {
            return None;
        }
        let mut best = current.clone();
        let mut found_at = self.sw.elapsed();
        let mut stale = 0usize;
        loop {
            self.sw.charge(1);
            let mut cand = current.clone();
            let fraction = if stale >= self.params.restart_patience {
                stale = 0;
                cand = best.clone();
                0.5
            } else {
                self.params.ruin_fraction
            };
            self.ruin(&mut cand, fraction);
            self.recreate(&mut cand);
            self.local_search(&mut cand);
            if self.sw.expired() {
                break;
            }
            if cand.better_than(&current) || fraction == 0.5 {
                current = cand;
            } else {
                stale += 1;
            }
            if current.better_than(&best) {
                best = current.clone();
                found_at = self.sw.elapsed();
                stale = 0;
            }
        }
        Some((best, found_at))
    }

    fn ruin(&mut self, state: &mut State, fraction: f64) {
        let assigned: Vec<usize> = state.routes.iter().flatten().copied().collect();
        if assigned.is_empty() {
            return;
        }
        let q = (libm::round(fraction * self.inst.len() as f64) as usize).clamp(1, assigned.len());
        let mut removed: Vec<usize> = if self.rng.random_bool(0.5) {
            let mut pool = assigned.clone();
            pool.shuffle(&mut self.rng);
            pool.truncate(q);
            pool
        } else {
            let anchor = assigned[self.rng.random_range(0..assigned.len())];
            let mut by_dist = assigned.clone();
            by_dist.sort_by(|&a, &b| {
                self.d(anchor, a)
                    .total_cmp(&self.d(anchor, b))
                    .then(a.cmp(&b))
            });
            by_dist.truncate(q);
            by_dist
        };
        removed.sort_unstable();
        for r in 0..state.routes.len() {
            if state.routes[r]
                .iter()
                .any(|c| removed.binary_search(c).is_ok())
            {
                let route: Vec<usize> = state.routes[r]
                    .iter()
                    .copied()
                    .filter(|c| removed.binary_search(c).is_err())
                    .collect();
                // removal keeps a route feasible; the check refreshes its cost
                match self.check(&route) {
                    Some(eval) => state.set_route(r, route, eval),
                    None => {
                        removed.extend(route.iter().copied());
                        state.set_route(r, Vec::new(), (0.0, 0.0));
                    }
                }
            }
        }
        state.drop_empty();
        state.unassigned.extend(removed);
        state.unassigned.sort_unstable();
        state.unassigned.dedup();
    }

    /// Best insertion per route for customer `c`: (route index or
    /// `routes.len()` for a new route, position, score, evaluation).
    fn options(&mut self, state: &State, c: usize) -> Vec<(usize, usize, f64, (f64, f64))> {
        let w = self.params.distance_weight;
        let mut out = Vec::new();
        let mut buf = Vec::new();
        for r in 0..state.routes.len() {
            let mut best: Option<(usize, f64, (f64, f64))> = None;
            for pos in 0..=state.routes[r].len() {
                buf.clear();
                buf.extend_from_slice(&state.routes[r][..pos]);
                buf.push(c);
                buf.extend_from_slice(&state.routes[r][pos..]);
                if let Some(eval) = self.check(&buf) {
                    let score =
                        w * (eval.0 - state.costs[r]) + (1.0 - w) * (eval.1 - state.durations[r]);
                    if best.map_or(true, |b| score < b.1 - EPS) {
                        best = Some((pos, score, eval));
                    }
                }
            }
            if let Some((pos, score, eval)) = best {
                out.push((r, pos, score, eval));
            }
        }
        if state.routes.len() < self.inst.fleet.vehicles {
            if let Some(eval) = self.check(&[c]) {
                out.push((state.routes.len(), 0, w * eval.0 + (1.0 - w) * eval.1, eval));
            }
        }
        out
    }

    fn recreate(&mut self, state: &mut State) {
        state.unassigned.shuffle(&mut self.rng);
        let mut pending = core::mem::take(&mut state.unassigned);
        let mut stuck = Vec::new();
        while !pending.is_empty() {
            if self.sw.expired() {
                break;
            }
            // (index in pending, priority, option)
            let mut choice: Option<(usize, f64, f64, (usize, usize, (f64, f64)))> = None;
            let mut k = 0;
            while k < pending.len() {
                let mut opts = self.options(state, pending[k]);
                if opts.is_empty() {
                    stuck.push(pending.swap_remove(k));
                    continue;
                }
                opts.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
                let best = opts[0];
                let priority = match self.params.insertion {
                    Insertion::Cheapest => -best.2,
                    Insertion::Regret(depth) => (1..depth)
                        .map(|j| opts.get(j).map_or(MISSING, |o| o.2 - best.2))
                        .sum(),
                };
                let better = match choice {
                    None => true,
                    Some((_, p, s, _)) => {
                        priority > p + EPS || (priority > p - EPS && best.2 < s - EPS)
                    }
                };
                if better {
                    choice = Some((k, priority, best.2, (best.0, best.1, best.3)));
                }
                k += 1;
            }
            let Some((k, _, _, (r, pos, eval))) = choice else {
                break;
            };
            let c = pending.swap_remove(k);
            if r == state.routes.len() {
                state.routes.push(vec![c]);
                state.costs.push(eval.0);
                state.durations.push(eval.1);
            } else {
                state.routes[r].insert(pos, c);
                state.costs[r] = eval.0;
                state.durations[r] = eval.1;
            }
        }
        stuck.extend(pending);
        stuck.sort_unstable();
        state.unassigned = stuck;
    }

    fn local_search(&mut self, state: &mut State) {
        loop {
            if self.sw.expired() {
                return;
            }
            let improved = (self.params.relocate && self.relocate(state))
                || (self.params.swap && self.swap(state))
                || (self.params.two_opt_star && self.two_opt_star(state));
            if !improved {
                return;
            }
        }
    }

    fn relocate(&mut self, state: &mut State) -> bool {
        for r1 in 0..state.routes.len() {
            for i in 0..state.routes[r1].len() {
                let c = state.routes[r1][i];
                let mut from = state.routes[r1].clone();
                from.remove(i);
                let Some(from_eval) = self.check(&from) else {
                    continue;
                };
                for r2 in 0..state.routes.len() {
                    if r2 == r1 {
                        for j in 0..=from.len() {
                            if j == i {
                                continue;
                            }
                            let mut cand = from.clone();
                            cand.insert(j, c);
                            if let Some(eval) = self.check(&cand) {
                                if eval.0 < state.costs[r1] - EPS {
                                    state.set_route(r1, cand, eval);
                                    return true;
                                }
                            }
                        }
                        continue;
                    }
                    for j in 0..=state.routes[r2].len() {
                        let mut to = state.routes[r2].clone();
                        to.insert(j, c);
                        if let Some(eval) = self.check(&to) {
                            let delta = from_eval.0 + eval.0 - state.costs[r1] - state.costs[r2];
                            if delta < -EPS {
                                state.set_route(r1, from, from_eval);
                                state.set_route(r2, to, eval);
                                state.drop_empty();
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    fn swap(&mut self, state: &mut State) -> bool {
        for r1 in 0..state.routes.len() {
            for r2 in r1 + 1..state.routes.len() {
                for i in 0..state.routes[r1].len() {
                    for j in 0..state.routes[r2].len() {
                        let mut a = state.routes[r1].clone();
                        let mut b = state.routes[r2].clone();
                        core::mem::swap(&mut a[i], &mut b[j]);
                        let Some(ea) = self.check(&a) else { continue };
                        let Some(eb) = self.check(&b) else { continue };
                        if ea.0 + eb.0 < state.costs[r1] + state.costs[r2] - EPS {
                            state.set_route(r1, a, ea);
                            state.set_route(r2, b, eb);
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn two_opt_star(&mut self, state: &mut State) -> bool {
        for r1 in 0..state.routes.len() {
            for r2 in r1 + 1..state.routes.len() {
                let (l1, l2) = (state.routes[r1].len(), state.routes[r2].len());
                for i in 0..=l1 {
                    for j in 0..=l2 {
                        if (i == 0 && j == 0) || (i == l1 && j == l2) {
                            continue;
                        }
                        let mut a: Vec<usize> = state.routes[r1][..i].to_vec();
                        a.extend_from_slice(&state.routes[r2][j..]);
                        let mut b: Vec<usize> = state.routes[r2][..j].to_vec();
                        b.extend_from_slice(&state.routes[r1][i..]);
                        let Some(ea) = self.check(&a) else { continue };
                        let Some(eb) = self.check(&b) else { continue };
                        if ea.0 + eb.0 < state.costs[r1] + state.costs[r2] - EPS {
                            state.set_route(r1, a, ea);
                            state.set_route(r2, b, eb);
                            state.drop_empty();
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::super::instance::tests::{customer, instance};
    use super::*;
    use crate::outcome::RunStatus;
    use crate::rng::rng_from;

    fn random_instance(n: usize, seed: u64, loose: bool) -> VrpInstance {
        let mut rng = rng_from(seed);
        let custs = (0..n)
            .map(|_| {
                let (a, w) = if loose {
                    (0.0, 1000.0)
                } else {
                    let a = rng.random_range(0.0..300.0);
                    (a, rng.random_range(40.0..200.0))
                };
                customer(
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    a,
                    a + w,
                    rng.random_range(0.0..10.0),
                )
            })
            .collect();
        instance(custs, 3, if loose { 1000.0 } else { 25.0 })
    }

    /// Every solution that uses each customer once, as ordered route lists.
    fn all_solutions(n: usize) -> Vec<Vec<Vec<usize>>> {
        fn extend(
            next: usize,
            n: usize,
            routes: &mut Vec<Vec<usize>>,
            out: &mut Vec<Vec<Vec<usize>>>,
        ) {
            if next > n {
                out.push(routes.clone());
                return;
            }
            for r in 0..routes.len() {
                for pos in 0..=routes[r].len() {
                    routes[r].insert(pos, next);
                    extend(next + 1, n, routes, out);
                    routes[r].remove(pos);
                }
            }
            routes.push(vec![next]);
            extend(next + 1, n, routes, out);
            routes.pop();
        }
        let mut out = Vec::new();
        extend(1, n, &mut Vec::new(), &mut out);
        out
    }

    fn optimum(inst: &VrpInstance) -> Option<f64> {
        all_solutions(inst.len())
            .into_iter()
            .filter_map(|routes| {
                let e = evaluate_solution(inst, &VrpSolution::new(routes)).unwrap();
                e.is_feasible().then_some(e.cost)
            })
            .min_by(f64::total_cmp)
    }

    #[test]
    fn lah_count_of_solutions() {
        assert_eq!(all_solutions(3).len(), 13);
        assert_eq!(all_solutions(5).len(), 501);
    }

    #[test]
    fn tiny_loose_instance_is_solved_feasibly() {
        let inst = random_instance(4, 1, true);
        let (o, sol) = solve_with_solution(
            &inst,
            &vrp_space().default_configuration(),
            0,
            0.01,
            &TimeSource::WorkUnits,
        )
        .unwrap();
        assert_eq!(o.status, RunStatus::Success);
        let e = evaluate_solution(&inst, &sol.unwrap()).unwrap();
        assert!(e.is_feasible());
        assert_eq!(Some(e.cost), o.quality);
    }

    #[test]
    fn never_beats_the_exhaustive_optimum() {
        let space = vrp_space();
        let mut rng = rng_from(99);
        let mut matched = 0;
        let mut feasible = 0;
        for seed in 0..12 {
            let inst = random_instance(5, seed, false);
            let opt = optimum(&inst);
            let cfg = space.sample(&mut rng);
            let o = baseline_solve(&inst, &cfg, seed, 0.02, &TimeSource::WorkUnits).unwrap();
            match (opt, o.status) {
                (Some(opt), RunStatus::Success) => {
                    feasible += 1;
                    let cost = o.quality.unwrap();
                    assert!(cost >= opt - 1e-9, "cost {cost} below optimum {opt}");
                    if (cost - opt).abs() <= 1e-9 {
                        matched += 1;
                    }
                }
                (None, status) => assert_ne!(status, RunStatus::Success),
                (Some(_), _) => {}
            }
        }
        assert!(
            feasible > 0 && matched * 10 >= feasible * 8,
            "{matched}/{feasible}"
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let inst = random_instance(12, 4, false);
        let cfg = vrp_space().default_configuration();
        let a = baseline_solve(&inst, &cfg, 3, 0.01, &TimeSource::WorkUnits).unwrap();
        let b = baseline_solve(&inst, &cfg, 3, 0.01, &TimeSource::WorkUnits).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn infeasible_and_usage_errors() {
        let inst = instance(
            vec![customer(1.0, 1.0, 50.0, 0.0, 0.0, 100.0, 0.0)],
            1,
            10.0,
        );
        let cfg = vrp_space().default_configuration();
        let o = baseline_solve(&inst, &cfg, 0, 1.0, &TimeSource::WorkUnits).unwrap();
        assert_eq!(o.status, RunStatus::Infeasible);
        assert!(baseline_solve(&inst, &cfg, 0, 0.0, &TimeSource::WorkUnits).is_err());
        let foreign = crate::tsp::tsp_space().default_configuration();
        assert!(baseline_solve(&inst, &foreign, 0, 1.0, &TimeSource::WorkUnits).is_err());
    }

    #[test]
    fn every_move_combination_yields_checked_solutions() {
        let inst = random_instance(15, 8, false);
        let space = vrp_space();
        for criterion in ["cheapest", "regret2", "regret3"] {
            for moves in 0..8u8 {
                let flag = |bit: u8| Value::cat(if moves & bit != 0 { "true" } else { "false" });
                let cfg = space
                    .default_configuration()
                    .with("insertion_criterion", Value::cat(criterion))
                    .with("relocate", flag(1))
                    .with("swap", flag(2))
                    .with("two_opt_star", flag(4));
                let (o, sol) =
                    solve_with_solution(&inst, &cfg, 1, 0.005, &TimeSource::WorkUnits).unwrap();
                if o.is_success() {
                    assert!(evaluate_solution(&inst, &sol.unwrap())
                        .unwrap()
                        .is_feasible());
                    assert!(o.elapsed <= o.cutoff);
                }
            }
        }
    }
}
