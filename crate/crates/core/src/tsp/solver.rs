//! Iterated local search for the symmetric TSP.
//!
//! Construction, then 2-opt (optionally with Or-opt segment moves of length
//! 1..=3) restricted to nearest-neighbour candidate lists, driven by a
//! don't-look-bit work queue when enabled. Local optima are escaped with
//! double-bridge kicks or segment shuffles. Every distance-delta evaluation
//! costs one work unit.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::clock::{Stopwatch, TimeSource};
use crate::error::{ensure, Error, Result};
use crate::outcome::RunOutcome;
use crate::params::{Configuration, Domain, Parameter, ParameterSpace, Value};
use crate::rng::{rng_from, SeededRng};
use crate::tsp::{Tour, TspInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    NearestNeighbor,
    GreedyEdge,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    DoubleBridge,
    SegmentShuffle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acceptance {
    /// Keep a perturbed local optimum only if it is no longer than the
    /// current one; restart from a fresh construction when stuck.
    AcceptBetter,
    /// Always move to the perturbed local optimum; jump back to the best
    /// tour when stuck.
    RestartFromBest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TspParams {
    pub construction: Construction,
    pub candidate_list_size: usize,
    pub use_or_opt: bool,
    pub dont_look_bits: bool,
    pub perturbation: Perturbation,
    pub perturbation_strength: usize,
    pub restart_patience: usize,
    pub acceptance: Acceptance,
}

pub fn tsp_space() -> ParameterSpace {
    ParameterSpace::new(
        "tsp-ils",
        vec![
            Parameter::new(
                "construction",
                Domain::choices(&["nearest_neighbor", "greedy_edge", "random"]),
                Value::cat("nearest_neighbor"),
            ),
            Parameter::new(
                "candidate_list_size",
                Domain::Integer { lo: 5, hi: 20 },
                Value::Int(8),
            ),
            Parameter::new("use_or_opt", Domain::boolean(), Value::cat("true")),
            Parameter::new("dont_look_bits", Domain::boolean(), Value::cat("true")),
            Parameter::new(
                "perturbation",
                Domain::choices(&["double_bridge", "segment_shuffle"]),
                Value::cat("double_bridge"),
            ),
            Parameter::new(
                "perturbation_strength",
                Domain::Integer { lo: 1, hi: 10 },
                Value::Int(1),
            ),
            Parameter::new(
                "restart_patience",
                Domain::Integer { lo: 10, hi: 1000 },
                Value::Int(100),
            ),
            Parameter::new(
                "acceptance",
                Domain::choices(&["accept_better", "restart_from_best"]),
                Value::cat("accept_better"),
            ),
        ],
    )
    .expect("static space is valid")
}

impl TspParams {
    pub fn from_config(config: &Configuration) -> Result<Self> {
        tsp_space().validate(config)?;
        Ok(TspParams {
            construction: match config.cat("construction")? {
                "nearest_neighbor" => Construction::NearestNeighbor,
                "greedy_edge" => Construction::GreedyEdge,
                _ => Construction::Random,
            },
            candidate_list_size: config.int("candidate_list_size")? as usize,
            use_or_opt: config.flag("use_or_opt")?,
            dont_look_bits: config.flag("dont_look_bits")?,
            perturbation: match config.cat("perturbation")? {
                "double_bridge" => Perturbation::DoubleBridge,
                _ => Perturbation::SegmentShuffle,
            },
            perturbation_strength: config.int("perturbation_strength")? as usize,
            restart_patience: config.int("restart_patience")? as usize,
            acceptance: match config.cat("acceptance")? {
                "accept_better" => Acceptance::AcceptBetter,
                _ => Acceptance::RestartFromBest,
            },
        })
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best_length: i64,
    pub best_tour: Tour,
    /// Elapsed seconds when the target length was first reached.
    pub target_hit_at: Option<f64>,
    pub work_units: u64,
    pub elapsed: f64,
}

/// Runs the configured search until `target` is reached or the cutoff
/// expires. With no target it always runs to the cutoff.
pub fn search(
    instance: &TspInstance,
    params: &TspParams,
    seed: u64,
    cutoff: f64,
    target: Option<i64>,
    time: &TimeSource,
) -> SearchResult {
    let mut ils = Ils::new(instance, *params, seed, cutoff, target, time);
    ils.run();
    SearchResult {
        best_length: ils.best_len,
        best_tour: Tour::new(ils.best_tour.clone()).expect("search keeps a permutation"),
        target_hit_at: ils.hit_at,
        work_units: ils.sw.units(),
        elapsed: ils.sw.elapsed(),
    }
}

/// One PAR-style run: success as soon as the reference optimum is reached,
/// timeout (elapsed = cutoff) otherwise.
pub fn solve(
    instance: &TspInstance,
    config: &Configuration,
    seed: u64,
    cutoff: f64,
    time: &TimeSource,
) -> Result<RunOutcome> {
    let optimum = instance.reference_optimum.ok_or_else(|| {
        Error::invalid(format!(
            "instance {} has no reference optimum",
            instance.name
        ))
    })?;
    ensure!(
        cutoff > 0.0 && cutoff.is_finite(),
        "cutoff must be positive, got {cutoff}"
    );
    let params = TspParams::from_config(config)?;
    let res = search(instance, &params, seed, cutoff, Some(optimum.value), time);
    Ok(match res.target_hit_at {
        Some(t) if t <= cutoff => RunOutcome::success(t, res.best_length as f64, seed, cutoff),
        _ => RunOutcome::timeout(seed, cutoff),
    })
}

struct Ils {
    n: usize,
    dist: Vec<i64>,
    neighbors: Vec<Vec<usize>>,
    tour: Vec<usize>,
    pos: Vec<usize>,
    len: i64,
    best_tour: Vec<usize>,
    best_len: i64,
    params: TspParams,
    rng: SeededRng,
    sw: Stopwatch,
    target: Option<i64>,
    hit_at: Option<f64>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
}

impl Ils {
    fn new(
        instance: &TspInstance,
        params: TspParams,
        seed: u64,
        cutoff: f64,
        target: Option<i64>,
        time: &TimeSource,
    ) -> Self {
        let n = instance.len();
        let mut sw = Stopwatch::new(time, cutoff);
        let mut dist = vec![0i64; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let d = instance.dist(a, b);
                dist[a * n + b] = d;
                dist[b * n + a] = d;
            }
        }
        sw.charge((n * (n - 1) / 2) as u64);
        let k = params.candidate_list_size.min(n - 1);
        let neighbors = (0..n)
            .map(|a| {
                let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
                others.sort_by_key(|&b| (dist[a * n + b], b));
                others.truncate(k);
                others
            })
            .collect();
        sw.charge((n * k) as u64);
        Ils {
            n,
            dist,
            neighbors,
            tour: (0..n).collect(),
            pos: (0..n).collect(),
            len: 0,
            best_tour: (0..n).collect(),
            best_len: i64::MAX,
            params,
            rng: rng_from(seed),
            sw,
            target,
            hit_at: None,
            queue: VecDeque::with_capacity(n),
            queued: vec![false; n],
        }
    }

    #[inline]
    fn d(&self, a: usize, b: usize) -> i64 {
        self.dist[a * self.n + b]
    }

    #[inline]
    fn next(&self, c: usize) -> usize {
        self.tour[(self.pos[c] + 1) % self.n]
    }

    #[inline]
    fn prev(&self, c: usize) -> usize {
        self.tour[(self.pos[c] + self.n - 1) % self.n]
    }

    fn done(&self) -> bool {
        self.hit_at.is_some() || self.sw.expired()
    }

    fn full_length(&self) -> i64 {
        (0..self.n)
            .map(|i| self.d(self.tour[i], self.tour[(i + 1) % self.n]))
            .sum()
    }

    fn set_tour(&mut self, order: Vec<usize>) {
        self.tour = order;
        for (i, &c) in self.tour.iter().enumerate() {
            self.pos[c] = i;
        }
        self.len = self.full_length();
        self.sw.charge(self.n as u64);
        self.note_length();
    }

    /// Records the current tour if it is the best so far and checks the target.
    fn note_length(&mut self) {
        if self.len < self.best_len {
            self.best_len = self.len;
            self.best_tour.clone_from(&self.tour);
        }
        if let Some(t) = self.target {
            if self.hit_at.is_none() && self.len <= t {
                self.hit_at = Some(self.sw.elapsed());
            }
        }
    }

    fn run(&mut self) {
        let order = self.construct();
        self.set_tour(order);
        self.activate_all();
        self.local_search();
        let mut since_improvement = 0usize;
        let mut best_seen = self.best_len;
        while !self.done() {
            self.sw.charge(1);
            let saved = match self.params.acceptance {
                Acceptance::AcceptBetter => Some((self.tour.clone(), self.len)),
                Acceptance::RestartFromBest => None,
            };
            self.perturb();
            self.local_search();
            if self.done() {
                break;
            }
            if let Some((tour, len)) = saved {
                if self.len > len {
                    self.set_tour(tour);
                }
            }
            if self.best_len < best_seen {
                best_seen = self.best_len;
                since_improvement = 0;
            } else {
                since_improvement += 1;
            }
            if since_improvement >= self.params.restart_patience {
                since_improvement = 0;
                match self.params.acceptance {
                    Acceptance::AcceptBetter => {
                        let order = self.construct();
                        self.set_tour(order);
                        if self.params.construction == Construction::GreedyEdge {
                            for _ in 0..(self.n / 8 + 1) {
                                self.double_bridge();
                            }
                        }
                    }
                    Acceptance::RestartFromBest => {
                        let best = self.best_tour.clone();
                        self.set_tour(best);
                    }
                }
                self.activate_all();
                self.local_search();
            }
        }
    }

    fn construct(&mut self) -> Vec<usize> {
        let n = self.n;
        match self.params.construction {
            Construction::Random => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut self.rng);
                self.sw.charge(n as u64);
                order
            }
            Construction::NearestNeighbor => {
                let start = self.rng.random_range(0..n);
                let mut visited = vec![false; n];
                let mut order = Vec::with_capacity(n);
                let mut cur = start;
                visited[cur] = true;
                order.push(cur);
                for _ in 1..n {
                    let mut best = usize::MAX;
                    let mut best_d = i64::MAX;
                    for c in 0..n {
                        if !visited[c] && self.d(cur, c) < best_d {
                            best_d = self.d(cur, c);
                            best = c;
                        }
                    }
                    self.sw.charge((n - order.len()) as u64);
                    visited[best] = true;
                    order.push(best);
                    cur = best;
                }
                order
            }
            Construction::GreedyEdge => self.greedy_edge(),
        }
    }

    fn greedy_edge(&mut self) -> Vec<usize> {
        let n = self.n;
        let mut edges: Vec<(i64, usize, usize)> = Vec::new();
        for a in 0..n {
            for &b in &self.neighbors[a] {
                if a < b || !self.neighbors[b].contains(&a) {
                    edges.push((self.d(a, b), a.min(b), a.max(b)));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        self.sw.charge(edges.len() as u64 * 4);

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut adj: Vec<[usize; 2]> = vec![[usize::MAX; 2]; n];
        let mut deg = vec![0usize; n];
        for &(_, a, b) in &edges {
            if deg[a] < 2 && deg[b] < 2 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    adj[a][deg[a]] = b;
                    adj[b][deg[b]] = a;
                    deg[a] += 1;
                    deg[b] += 1;
                }
            }
        }

        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let walk = |from: usize, visited: &mut Vec<bool>, order: &mut Vec<usize>| -> usize {
            let mut cur = from;
            loop {
                visited[cur] = true;
                order.push(cur);
                let next = adj[cur][..deg[cur]].iter().copied().find(|&x| !visited[x]);
                match next {
                    Some(x) => cur = x,
                    None => return cur,
                }
            }
        };
        let first = (0..n)
            .find(|&v| deg[v] < 2)
            .expect("forest has an endpoint");
        let mut end = walk(first, &mut visited, &mut order);
        while order.len() < n {
            let mut best = usize::MAX;
            let mut best_d = i64::MAX;
            for v in 0..n {
                if !visited[v] && deg[v] < 2 && self.d(end, v) < best_d {
                    best_d = self.d(end, v);
                    best = v;
                }
            }
            self.sw.charge(n as u64);
            end = walk(best, &mut visited, &mut order);
        }
        order
    }

    fn activate_all(&mut self) {
        self.queue.clear();
        for c in 0..self.n {
            self.queue.push_back(self.tour[c]);
            self.queued[self.tour[c]] = true;
        }
    }

    fn activate(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            self.queue.push_back(c);
        }
    }

    fn local_search(&mut self) {
        if self.n < 4 {
            self.queue.clear();
            self.queued.iter_mut().for_each(|q| *q = false);
            return;
        }
        let mut improved_this_pass = false;
        loop {
            if self.done() {
                return;
            }
            let Some(a) = self.queue.pop_front() else {
                if !self.params.dont_look_bits && improved_this_pass {
                    improved_this_pass = false;
                    self.activate_all();
                    continue;
                }
                return;
            };
            self.queued[a] = false;
            let touched = match self.try_two_opt(a) {
                Some(t) => Some(t),
                None if self.params.use_or_opt => self.try_or_opt(a),
                None => None,
            };
            if let Some(touched) = touched {
                improved_this_pass = true;
                self.note_length();
                if self.params.dont_look_bits {
                    self.activate(a);
                    for c in touched {
                        self.activate(c);
                    }
                }
            }
        }
    }

    fn try_two_opt(&mut self, a: usize) -> Option<[usize; 4]> {
        for forward in [true, false] {
            let a_nb = if forward { self.next(a) } else { self.prev(a) };
            let d1 = self.d(a, a_nb);
            for i in 0..self.neighbors[a].len() {
                let c = self.neighbors[a][i];
                self.sw.charge(1);
                let g = d1 - self.d(a, c);
                if g <= 0 {
                    break;
                }
                let c_nb = if forward { self.next(c) } else { self.prev(c) };
                if c == a_nb || c_nb == a {
                    continue;
                }
                let delta = self.d(a, c) + self.d(a_nb, c_nb) - d1 - self.d(c, c_nb);
                if delta < 0 {
                    if forward {
                        self.reverse(self.pos[a_nb], self.pos[c]);
                    } else {
                        self.reverse(self.pos[c], self.pos[a_nb]);
                    }
                    self.len += delta;
                    return Some([a, a_nb, c, c_nb]);
                }
            }
        }
        None
    }

    /// Reverses the tour path from position `i` forward to position `j`.
    fn reverse(&mut self, i: usize, j: usize) {
        let n = self.n;
        let inner = (j + n - i) % n + 1;
        let (mut lo, mut hi, len) = if 2 * inner > n {
            ((j + 1) % n, (i + n - 1) % n, n - inner)
        } else {
            (i, j, inner)
        };
        for _ in 0..len / 2 {
            let (x, y) = (self.tour[lo], self.tour[hi]);
            self.tour[lo] = y;
            self.tour[hi] = x;
            self.pos[y] = lo;
            self.pos[x] = hi;
            lo = (lo + 1) % n;
            hi = (hi + n - 1) % n;
        }
        self.sw.charge((len / 2) as u64);
    }

    fn try_or_opt(&mut self, a: usize) -> Option<[usize; 4]> {
        let n = self.n;
        for seg_len in 1..=3usize {
            if n < seg_len + 3 {
                break;
            }
            let s1 = a;
            let start = self.pos[s1];
            let s_last = self.tour[(start + seg_len - 1) % n];
            let p = self.prev(s1);
            let nx = self.next(s_last);
            let in_segment = |pos: &[usize], c: usize| (pos[c] + n - start) % n < seg_len;
            let removal_gain = self.d(p, s1) + self.d(s_last, nx) - self.d(p, nx);
            if removal_gain <= 0 {
                continue;
            }
            for end in [s1, s_last] {
                for i in 0..self.neighbors[end].len() {
                    let c = self.neighbors[end][i];
                    self.sw.charge(1);
                    if removal_gain - self.d(end, c) <= 0 {
                        break;
                    }
                    if in_segment(&self.pos, c) {
                        continue;
                    }
                    for (u, v) in [(c, self.next(c)), (self.prev(c), c)] {
                        if in_segment(&self.pos, u) || in_segment(&self.pos, v) {
                            continue;
                        }
                        self.sw.charge(2);
                        let keep = self.d(u, s1) + self.d(s_last, v);
                        let flip = self.d(u, s_last) + self.d(s1, v);
                        let (insert, reversed) = if flip < keep {
                            (flip, true)
                        } else {
                            (keep, false)
                        };
                        let delta = insert - self.d(u, v) - removal_gain;
                        if delta < 0 {
                            self.move_segment(start, seg_len, u, reversed);
                            self.len += delta;
                            return Some([p, nx, u, v]);
                        }
                    }
                }
            }
        }
        None
    }

    fn move_segment(&mut self, start: usize, seg_len: usize, after: usize, reversed: bool) {
        let n = self.n;
        let mut segment: Vec<usize> = (0..seg_len).map(|k| self.tour[(start + k) % n]).collect();
        if reversed {
            segment.reverse();
        }
        let mut rest: Vec<usize> = Vec::with_capacity(n);
        for k in seg_len..n {
            rest.push(self.tour[(start + k) % n]);
        }
        let at = rest
            .iter()
            .position(|&c| c == after)
            .expect("insertion point outside segment");
        let mut order = Vec::with_capacity(n);
        order.extend_from_slice(&rest[..=at]);
        order.extend_from_slice(&segment);
        order.extend_from_slice(&rest[at + 1..]);
        self.tour = order;
        for (i, &c) in self.tour.iter().enumerate() {
            self.pos[c] = i;
        }
        self.sw.charge(n as u64);
    }

    fn perturb(&mut self) {
        if self.n < 4 {
            return;
        }
        match self.params.perturbation {
            Perturbation::DoubleBridge => {
                for _ in 0..self.params.perturbation_strength {
                    self.double_bridge();
                }
            }
            Perturbation::SegmentShuffle => self.segment_shuffle(),
        }
    }

    fn double_bridge(&mut self) {
        let n = self.n;
        let mut cuts = [0usize; 3];
        // three distinct cut positions in 1..n
        let mut picked = 0;
        while picked < 3 {
            let c = self.rng.random_range(1..n);
            if !cuts[..picked].contains(&c) {
                cuts[picked] = c;
                picked += 1;
            }
        }
        cuts.sort_unstable();
        let [p1, p2, p3] = cuts;
        let offset = self.rng.random_range(0..n);
        let base: Vec<usize> = (0..n).map(|k| self.tour[(offset + k) % n]).collect();
        let mut order = Vec::with_capacity(n);
        order.extend_from_slice(&base[..p1]);
        order.extend_from_slice(&base[p2..p3]);
        order.extend_from_slice(&base[p1..p2]);
        order.extend_from_slice(&base[p3..]);
        for &i in &[0, p1 - 1, p1, p2 - 1, p2, p3 - 1, p3 % n, n - 1] {
            self.activate(base[i]);
        }
        self.set_tour(order);
    }

    fn segment_shuffle(&mut self) {
        let n = self.n;
        let len = (self.params.perturbation_strength + 2).min(n);
        let start = self.rng.random_range(0..n);
        let mut cities: Vec<usize> = (0..len).map(|k| self.tour[(start + k) % n]).collect();
        cities.shuffle(&mut self.rng);
        let mut order = self.tour.clone();
        for (k, &c) in cities.iter().enumerate() {
            order[(start + k) % n] = c;
        }
        self.activate(self.tour[(start + n - 1) % n]);
        self.activate(self.tour[(start + len) % n]);
        for c in cities {
            self.activate(c);
        }
        self.set_tour(order);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::tsp::{held_karp_optimum, tour_length, Point, Provenance};

    fn random_instance(n: usize, seed: u64) -> TspInstance {
        let mut rng = rng_from(seed);
        let cities = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
            .collect();
        TspInstance::new("r", cities).unwrap()
    }

    fn with_exact(inst: TspInstance) -> TspInstance {
        let opt = held_karp_optimum(&inst).unwrap();
        inst.with_optimum(opt, Provenance::Exact)
    }

    #[test]
    fn every_configuration_dimension_runs() {
        let space = tsp_space();
        let inst = random_instance(60, 5);
        for seed in 0..24u64 {
            let cfg = space.sample(&mut rng_from(seed));
            let params = TspParams::from_config(&cfg).unwrap();
            let res = search(&inst, &params, seed, 0.02, None, &TimeSource::WorkUnits);
            assert_eq!(tour_length(&inst, &res.best_tour).unwrap(), res.best_length);
            assert!(res.target_hit_at.is_none());
        }
    }

    #[test]
    fn reaches_exact_optimum_on_small_instances() {
        let space = tsp_space();
        for i in 0..6u64 {
            let inst = with_exact(random_instance(10, 100 + i));
            let cfg = space.sample(&mut rng_from(i));
            let out = solve(&inst, &cfg, i, 5.0, &TimeSource::WorkUnits).unwrap();
            assert!(out.is_success(), "instance {i} timed out");
            assert_eq!(
                out.quality,
                Some(inst.reference_optimum.unwrap().value as f64)
            );
            assert!(out.check().is_ok());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let inst = with_exact(random_instance(12, 9));
        let cfg = tsp_space().default_configuration();
        let a = solve(&inst, &cfg, 77, 1.0, &TimeSource::WorkUnits).unwrap();
        let b = solve(&inst, &cfg, 77, 1.0, &TimeSource::WorkUnits).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn forced_timeout_on_large_instance() {
        let inst = random_instance(500, 1).with_optimum(1, Provenance::Consensus);
        let out = solve(
            &inst,
            &tsp_space().default_configuration(),
            0,
            0.001,
            &TimeSource::WorkUnits,
        )
        .unwrap();
        assert_eq!(out.status, crate::RunStatus::Timeout);
        assert_eq!(out.elapsed, 0.001);
        assert_eq!(out.quality, None);
    }

    #[test]
    fn usage_errors() {
        let inst = random_instance(8, 2);
        let cfg = tsp_space().default_configuration();
        assert!(matches!(
            solve(&inst, &cfg, 0, 1.0, &TimeSource::WorkUnits),
            Err(Error::InvalidInput(_))
        ));
        let inst = with_exact(inst);
        assert!(solve(&inst, &cfg, 0, 0.0, &TimeSource::WorkUnits).is_err());
        let bad = cfg.with("candidate_list_size", Value::Int(40));
        assert!(solve(&inst, &bad, 0, 1.0, &TimeSource::WorkUnits).is_err());
    }

    #[test]
    fn never_beats_an_exact_optimum() {
        let space = tsp_space();
        for i in 0..10u64 {
            let inst = random_instance(9, 300 + i);
            let opt = held_karp_optimum(&inst).unwrap();
            let params = TspParams::from_config(&space.sample(&mut rng_from(i))).unwrap();
            let res = search(&inst, &params, i, 0.01, None, &TimeSource::WorkUnits);
            assert!(res.best_length >= opt);
        }
    }
}
