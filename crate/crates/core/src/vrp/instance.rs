use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fingerprint::{push_real, Fingerprint};
use crate::outcome::RunOutcome;
use crate::tsp::Point;

/// Score of a run that found no feasible solution.
pub const PANC_PENALTY: f64 = 2000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub x: f64,
    pub y: f64,
    /// Earliest departure.
    pub a: f64,
    /// Latest return.
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    #[serde(rename = "J")]
    pub vehicles: usize,
    #[serde(rename = "Q")]
    pub capacity: f64,
    pub dispatch_cost: f64,
    pub unit_cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub x: f64,
    pub y: f64,
    pub delivery: f64,
    pub pickup: f64,
    pub a: f64,
    pub b: f64,
    pub service: f64,
}

impl Customer {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Customers are addressed 1..=N in routes; 0 is the depot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VrpInstance {
    pub name: String,
    pub depot: Depot,
    pub fleet: Fleet,
    pub customers: Vec<Customer>,
}

impl<'de> Deserialize<'de> for VrpInstance {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            name: String,
            depot: Depot,
            fleet: Fleet,
            customers: Vec<Customer>,
        }
        let raw = Raw::deserialize(deserializer)?;
        VrpInstance::new(&raw.name, raw.depot, raw.fleet, raw.customers)
            .map_err(serde::de::Error::custom)
    }
}

impl VrpInstance {
    pub fn new(name: &str, depot: Depot, fleet: Fleet, customers: Vec<Customer>) -> Result<Self> {
        let inst = VrpInstance {
            name: name.to_string(),
            depot,
            fleet,
            customers,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.depot;
        ensure!(
            [d.x, d.y, d.a, d.b].iter().all(|v| v.is_finite()) && d.a <= d.b,
            "depot window must satisfy a <= b"
        );
        let f = &self.fleet;
        ensure!(f.vehicles >= 1, "fleet needs at least one vehicle");
        ensure!(
            f.capacity > 0.0 && f.capacity.is_finite(),
            "capacity must be positive"
        );
        ensure!(
            f.dispatch_cost >= 0.0
                && f.unit_cost >= 0.0
                && f.dispatch_cost.is_finite()
                && f.unit_cost.is_finite(),
            "costs must be non-negative"
        );
        ensure!(
            !self.customers.is_empty(),
            "instance needs at least one customer"
        );
        for (i, c) in self.customers.iter().enumerate() {
            ensure!(
                [c.x, c.y, c.delivery, c.pickup, c.a, c.b, c.service]
                    .iter()
                    .all(|v| v.is_finite()),
                "customer {} has a non-finite field",
                i + 1
            );
            ensure!(c.a <= c.b, "customer {} window is inverted", i + 1);
            ensure!(
                c.delivery >= 0.0 && c.pickup >= 0.0 && c.service >= 0.0,
                "customer {} has a negative demand or service time",
                i + 1
            );
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    /// Node coordinates; index 0 is the depot.
    pub fn point(&self, node: usize) -> Point {
        if node == 0 {
            Point::new(self.depot.x, self.depot.y)
        } else {
            self.customers[node - 1].point()
        }
    }

    pub fn customer(&self, node: usize) -> &Customer {
        &self.customers[node - 1]
    }

    /// Unrounded Euclidean distance between nodes.
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.point(a).dist(&self.point(b))
    }

    /// Mean Euclidean distance over unordered customer pairs.
    pub fn mean_pairwise_distance(&self) -> Result<f64> {
        let n = self.len();
        ensure!(n >= 2, "mean pairwise distance needs at least 2 customers");
        let mut sum = 0.0;
        for i in 1..=n {
            for j in i + 1..=n {
                sum += self.dist(i, j);
            }
        }
        Ok(sum / (n * (n - 1) / 2) as f64)
    }

    /// Digest of everything except the name.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut s = String::from("vrpspdtw\ndepot");
        for v in [self.depot.x, self.depot.y, self.depot.a, self.depot.b] {
            s.push(' ');
            push_real(&mut s, v);
        }
        let _ = write!(s, "\nfleet {}", self.fleet.vehicles);
        for v in [
            self.fleet.capacity,
            self.fleet.dispatch_cost,
            self.fleet.unit_cost,
        ] {
            s.push(' ');
            push_real(&mut s, v);
        }
        for c in &self.customers {
            s.push('\n');
            for (k, v) in [c.x, c.y, c.delivery, c.pickup, c.a, c.b, c.service]
                .into_iter()
                .enumerate()
            {
                if k > 0 {
                    s.push(' ');
                }
                push_real(&mut s, v);
            }
        }
        Fingerprint::of(&s)
    }

    /// A customer that no route can serve alone, or fleet-wide demand above
    /// total capacity, makes the instance infeasible regardless of solver.
    pub fn provably_infeasible(&self) -> bool {
        let q = self.fleet.capacity;
        let total = self.fleet.vehicles as f64 * q;
        let deliveries: f64 = self.customers.iter().map(|c| c.delivery).sum();
        let pickups: f64 = self.customers.iter().map(|c| c.pickup).sum();
        if deliveries > total || pickups > total {
            return true;
        }
        (1..=self.len()).any(|i| match schedule_route(self, &[i]) {
            Ok(s) => !s.violations.is_empty(),
            Err(_) => true,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrpSolution {
    pub routes: Vec<Vec<usize>>,
}

impl VrpSolution {
    pub fn new(routes: Vec<Vec<usize>>) -> Self {
        VrpSolution { routes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RouteViolation {
    WindowOverrun {
        customer: usize,
        arrival: f64,
        due: f64,
    },
    Capacity {
        peak_load: f64,
        capacity: f64,
    },
    LateReturn {
        arrival: f64,
        due: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    FleetSize {
        used: usize,
        available: usize,
    },
    ServiceCount {
        customer: usize,
        times: usize,
    },
    EmptyRoute {
        route: usize,
    },
    Route {
        route: usize,
        violation: RouteViolation,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteSchedule {
    /// Per visited customer, in route order.
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
    pub depot_departure: f64,
    pub return_time: f64,
    pub travel_distance: f64,
    pub initial_load: f64,
    pub peak_load: f64,
    pub violations: Vec<RouteViolation>,
}

impl RouteSchedule {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Simulates one vehicle leaving the depot at its earliest departure with
/// all of the route's deliveries on board, at unit speed.
pub fn schedule_route(instance: &VrpInstance, route: &[usize]) -> Result<RouteSchedule> {
    let n = instance.len();
    if let Some(&bad) = route.iter().find(|&&c| c == 0 || c > n) {
        return Err(Error::invalid(alloc::format!(
            "route references unknown customer {bad}"
        )));
    }
    let initial_load: f64 = route.iter().map(|&c| instance.customer(c).delivery).sum();
    let mut load = initial_load;
    let mut peak = initial_load;
    let mut time = instance.depot.a;
    let mut travel = 0.0;
    let mut prev = 0;
    let mut arrivals = Vec::with_capacity(route.len());
    let mut departures = Vec::with_capacity(route.len());
    let mut violations = Vec::new();
    for &c in route {
        let leg = instance.dist(prev, c);
        travel += leg;
        let arr = time + leg;
        let cust = instance.customer(c);
        if arr > cust.b {
            violations.push(RouteViolation::WindowOverrun {
                customer: c,
                arrival: arr,
                due: cust.b,
            });
        }
        let dep = arr.max(cust.a) + cust.service;
        load += cust.pickup - cust.delivery;
        peak = peak.max(load);
        arrivals.push(arr);
        departures.push(dep);
        time = dep;
        prev = c;
    }
    let leg = instance.dist(prev, 0);
    travel += leg;
    let return_time = time + leg;
    if peak > instance.fleet.capacity {
        violations.push(RouteViolation::Capacity {
            peak_load: peak,
            capacity: instance.fleet.capacity,
        });
    }
    if return_time > instance.depot.b {
        violations.push(RouteViolation::LateReturn {
            arrival: return_time,
            due: instance.depot.b,
        });
    }
    Ok(RouteSchedule {
        arrivals,
        departures,
        depot_departure: instance.depot.a,
        return_time,
        travel_distance: travel,
        initial_load,
        peak_load: peak,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Total cost (dispatch cost per route plus unit cost times distance) and
/// every constraint violation. Feasible exactly when no violation is listed.
pub fn evaluate_solution(instance: &VrpInstance, solution: &VrpSolution) -> Result<Evaluation> {
    let mut violations = Vec::new();
    let used = solution.routes.len();
    if used > instance.fleet.vehicles {
        violations.push(Violation::FleetSize {
            used,
            available: instance.fleet.vehicles,
        });
    }
    let mut served = vec![0usize; instance.len() + 1];
    let mut cost = 0.0;
    for (r, route) in solution.routes.iter().enumerate() {
        if route.is_empty() {
            violations.push(Violation::EmptyRoute { route: r });
            continue;
        }
        let sched = schedule_route(instance, route)?;
        for &c in route {
            served[c] += 1;
        }
        cost += route_cost(instance, sched.travel_distance);
        violations.extend(sched.violations.into_iter().map(|v| Violation::Route {
            route: r,
            violation: v,
        }));
    }
    for (c, &times) in served.iter().enumerate().skip(1) {
        if times != 1 {
            violations.push(Violation::ServiceCount { customer: c, times });
        }
    }
    Ok(Evaluation { cost, violations })
}

pub(crate) fn route_cost(instance: &VrpInstance, travel_distance: f64) -> f64 {
    instance.fleet.dispatch_cost + travel_distance * instance.fleet.unit_cost
}

/// Penalized normalized cost of one run: cost over mean pairwise customer
/// distance, or [`PANC_PENALTY`] without a feasible solution.
pub fn panc(instance: &VrpInstance, outcome: &RunOutcome) -> Result<f64> {
    let mean = instance.mean_pairwise_distance()?;
    Ok(match (outcome.is_success(), outcome.quality) {
        (true, Some(cost)) => cost / mean,
        _ => PANC_PENALTY,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn customer(x: f64, y: f64, d: f64, p: f64, a: f64, b: f64, s: f64) -> Customer {
        Customer {
            x,
            y,
            delivery: d,
            pickup: p,
            a,
            b,
            service: s,
        }
    }

    pub(crate) fn instance(
        customers: Vec<Customer>,
        vehicles: usize,
        capacity: f64,
    ) -> VrpInstance {
        VrpInstance::new(
            "t",
            Depot {
                x: 0.0,
                y: 0.0,
                a: 0.0,
                b: 1000.0,
            },
            Fleet {
                vehicles,
                capacity,
                dispatch_cost: 100.0,
                unit_cost: 1.0,
            },
            customers,
        )
        .unwrap()
    }

    #[test]
    fn early_arrival_waits_for_window() {
        let inst = instance(vec![customer(3.0, 4.0, 0.0, 0.0, 10.0, 50.0, 2.0)], 1, 10.0);
        let s = schedule_route(&inst, &[1]).unwrap();
        assert_eq!(s.arrivals, vec![5.0]);
        assert_eq!(s.departures, vec![12.0]);
        assert_eq!(s.return_time, 17.0);
        assert_eq!(s.travel_distance, 10.0);
        assert!(s.is_feasible());
    }

    #[test]
    fn load_accounting_and_capacity() {
        let c = customer(3.0, 4.0, 3.0, 2.0, 0.0, 50.0, 0.0);
        let s = schedule_route(&instance(vec![c], 1, 10.0), &[1]).unwrap();
        assert_eq!((s.initial_load, s.peak_load), (3.0, 3.0));
        let s = schedule_route(&instance(vec![c], 1, 2.0), &[1]).unwrap();
        assert_eq!(
            s.violations,
            vec![RouteViolation::Capacity {
                peak_load: 3.0,
                capacity: 2.0
            }]
        );
    }

    #[test]
    fn window_and_return_violations() {
        let mut inst = instance(
            vec![customer(30.0, 40.0, 0.0, 0.0, 0.0, 20.0, 0.0)],
            1,
            10.0,
        );
        inst.depot.b = 60.0;
        let s = schedule_route(&inst, &[1]).unwrap();
        assert_eq!(s.violations.len(), 2);
        assert!(schedule_route(&inst, &[2]).is_err());
        assert!(schedule_route(&inst, &[0]).is_err());
    }

    #[test]
    fn cost_and_solution_violations() {
        // routes of length 10 and 20
        let inst = instance(
            vec![
                customer(5.0, 0.0, 0.0, 0.0, 0.0, 1000.0, 0.0),
                customer(0.0, 10.0, 0.0, 0.0, 0.0, 1000.0, 0.0),
            ],
            2,
            10.0,
        );
        let e = evaluate_solution(&inst, &VrpSolution::new(vec![vec![1], vec![2]])).unwrap();
        assert_eq!(e.cost, 230.0);
        assert!(e.is_feasible());
        let e = evaluate_solution(&inst, &VrpSolution::new(vec![vec![1, 2], vec![2]])).unwrap();
        assert!(e.violations.contains(&Violation::ServiceCount {
            customer: 2,
            times: 2
        }));
        let e =
            evaluate_solution(&inst, &VrpSolution::new(vec![vec![1], vec![2], vec![]])).unwrap();
        assert!(e.violations.contains(&Violation::FleetSize {
            used: 3,
            available: 2
        }));
        let e = evaluate_solution(&inst, &VrpSolution::new(vec![vec![1]])).unwrap();
        assert!(e.violations.contains(&Violation::ServiceCount {
            customer: 2,
            times: 0
        }));
    }

    #[test]
    fn panc_examples() {
        let inst = instance(
            vec![
                customer(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0),
                customer(50.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            ],
            1,
            1.0,
        );
        assert_eq!(inst.mean_pairwise_distance().unwrap(), 50.0);
        assert_eq!(
            panc(&inst, &RunOutcome::success(1.0, 12000.0, 0, 5.0)).unwrap(),
            240.0
        );
        assert_eq!(
            panc(&inst, &RunOutcome::timeout(0, 5.0)).unwrap(),
            PANC_PENALTY
        );
        assert_eq!(
            panc(&inst, &RunOutcome::infeasible(0.0, 0, 5.0)).unwrap(),
            2000.0
        );
        let single = instance(vec![customer(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0)], 1, 1.0);
        assert!(panc(&single, &RunOutcome::timeout(0, 5.0)).is_err());
    }

    #[test]
    fn rejects_malformed_instances() {
        let bad = customer(0.0, 0.0, 0.0, 0.0, 5.0, 1.0, 0.0);
        let d = Depot {
            x: 0.0,
            y: 0.0,
            a: 0.0,
            b: 10.0,
        };
        let f = Fleet {
            vehicles: 1,
            capacity: 1.0,
            dispatch_cost: 0.0,
            unit_cost: 1.0,
        };
        assert!(VrpInstance::new("x", d, f, vec![bad]).is_err());
        assert!(VrpInstance::new("x", d, f, vec![]).is_err());
        assert!(VrpInstance::new(
            "x",
            d,
            Fleet { vehicles: 0, ..f },
            vec![customer(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)]
        )
        .is_err());
    }

    fn arb_customer() -> impl Strategy<Value = Customer> {
        (
            0.0..100.0f64,
            0.0..100.0f64,
            0.0..20.0f64,
            0.0..20.0f64,
            0.0..500.0f64,
            0.0..500.0f64,
            0.0..10.0f64,
        )
            .prop_map(|(x, y, d, p, a, w, s)| customer(x, y, d, p, a, a + w, s))
    }

    proptest! {
        #[test]
        fn schedule_laws(custs in prop::collection::vec(arb_customer(), 1..8), zero_pickups in any::<bool>()) {
            let custs: Vec<Customer> = custs
                .into_iter()
                .map(|c| if zero_pickups { Customer { pickup: 0.0, ..c } } else { c })
                .collect();
            let n = custs.len();
            let inst = instance(custs, 3, 50.0);
            let route: Vec<usize> = (1..=n).collect();
            let s = schedule_route(&inst, &route).unwrap();
            let total_d: f64 = inst.customers.iter().map(|c| c.delivery).sum();
            let total_p: f64 = inst.customers.iter().map(|c| c.pickup).sum();
            prop_assert!(s.peak_load >= total_d.max(total_p) - 1e-9);
            if zero_pickups {
                prop_assert_eq!(s.peak_load, total_d);
            }
            for (k, &c) in route.iter().enumerate() {
                let cust = inst.customer(c);
                let start = s.departures[k] - cust.service;
                let expected = if s.arrivals[k] < cust.a { cust.a } else { s.arrivals[k] };
                prop_assert!((start - expected).abs() <= 1e-9 * expected.max(1.0));
            }
        }

        #[test]
        fn cost_ignores_route_order(custs in prop::collection::vec(arb_customer(), 3..8), cut in 1usize..3) {
            let n = custs.len();
            let inst = instance(custs, 3, 50.0);
            let a: Vec<usize> = (1..=cut).collect();
            let b: Vec<usize> = (cut + 1..=n).collect();
            let e1 = evaluate_solution(&inst, &VrpSolution::new(vec![a.clone(), b.clone()])).unwrap();
            let e2 = evaluate_solution(&inst, &VrpSolution::new(vec![b, a])).unwrap();
            prop_assert!((e1.cost - e2.cost).abs() <= 1e-9 * e1.cost.abs().max(1.0));
            prop_assert_eq!(e1.is_feasible(), e2.is_feasible());
        }
    }
}
