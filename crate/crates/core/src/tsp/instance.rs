use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fingerprint::{push_real, Fingerprint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// EUC_2D distance: Euclidean length rounded to the nearest integer,
/// halves away from zero.
pub fn nint_distance(a: &Point, b: &Point) -> i64 {
    libm::round(a.dist(b)) as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Proven optimal by exhaustive dynamic programming.
    Exact,
    /// Best of several long independent solver runs.
    Consensus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub value: i64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TspInstance {
    pub name: String,
    pub cities: Vec<Point>,
    pub reference_optimum: Option<ReferenceOptimum>,
}

impl TspInstance {
    pub fn new(name: &str, cities: Vec<Point>) -> Result<Self> {
        ensure!(
            cities.len() >= 3,
            "a TSP instance needs at least 3 cities, got {}",
            cities.len()
        );
        ensure!(
            cities.iter().all(|p| p.x.is_finite() && p.y.is_finite()),
            "city coordinates must be finite"
        );
        Ok(TspInstance {
            name: name.to_string(),
            cities,
            reference_optimum: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn dist(&self, a: usize, b: usize) -> i64 {
        nint_distance(&self.cities[a], &self.cities[b])
    }

    /// Digest of the coordinates only; name and optimum do not take part.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut s = String::with_capacity(self.cities.len() * 50);
        s.push_str("tsp");
        for p in &self.cities {
            s.push(';');
            push_real(&mut s, p.x);
            s.push(',');
            push_real(&mut s, p.y);
        }
        Fingerprint::of(&s)
    }

    pub fn with_optimum(mut self, value: i64, provenance: Provenance) -> Self {
        self.reference_optimum = Some(ReferenceOptimum { value, provenance });
        self
    }

    /// `(x_min, x_max, y_min, y_max)` over all cities.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.cities.iter().fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(x0, x1, y0, y1), p| (x0.min(p.x), x1.max(p.x), y0.min(p.y), y1.max(p.y)),
        )
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{} ({} cities)", self.name, self.cities.len());
        s
    }
}

/// A closed tour given as a permutation of city indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tour(Vec<usize>);

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = alloc::vec![false; n];
        for &c in &order {
            ensure!(c < n && !seen[c], "tour is not a permutation of 0..{n}");
            seen[c] = true;
        }
        Ok(Tour(order))
    }

    pub fn identity(n: usize) -> Self {
        Tour((0..n).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn tour_length(instance: &TspInstance, tour: &Tour) -> Result<i64> {
    if tour.len() != instance.len() {
        return Err(Error::invalid(alloc::format!(
            "tour visits {} cities, instance has {}",
            tour.len(),
            instance.len()
        )));
    }
    let order = tour.order();
    let n = order.len();
    Ok((0..n)
        .map(|i| instance.dist(order[i], order[(i + 1) % n]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn unit_square() -> TspInstance {
        TspInstance::new(
            "square",
            alloc::vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0)
            ],
        )
        .unwrap()
    }

    fn random_instance(n: usize, seed: u64) -> TspInstance {
        let mut rng = rng_from(seed);
        let cities = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        TspInstance::new("r", cities).unwrap()
    }

    #[test]
    fn unit_square_tour() {
        let inst = unit_square();
        assert_eq!(
            tour_length(&inst, &Tour::new(alloc::vec![0, 1, 2, 3]).unwrap()).unwrap(),
            4
        );
    }

    #[test]
    fn nint_rounds_half_away_from_zero() {
        assert_eq!(
            nint_distance(&Point::new(0.0, 0.0), &Point::new(2.5, 0.0)),
            3
        );
        assert_eq!(
            nint_distance(&Point::new(0.0, 0.0), &Point::new(2.4999, 0.0)),
            2
        );
        assert_eq!(
            nint_distance(&Point::new(0.0, 0.0), &Point::new(3.0, 4.0)),
            5
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Tour::new(alloc::vec![0, 0, 1]).is_err());
        assert!(Tour::new(alloc::vec![0, 3, 1]).is_err());
        assert!(TspInstance::new("x", alloc::vec![Point::new(0.0, 0.0); 2]).is_err());
        assert!(TspInstance::new("x", alloc::vec![Point::new(f64::NAN, 0.0); 3]).is_err());
        let inst = unit_square();
        assert!(tour_length(&inst, &Tour::identity(3)).is_err());
    }

    #[test]
    fn matches_independent_edge_sum_on_eight_cities() {
        // oracle: explicit sqrt-and-round edge sum, written out longhand
        let inst = random_instance(8, 42);
        let order = [3usize, 1, 7, 0, 5, 2, 6, 4];
        let mut expected = 0i64;
        for k in 0..8 {
            let a = inst.cities[order[k]];
            let b = inst.cities[order[(k + 1) % 8]];
            let d = ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)).sqrt();
            expected += (d + 0.5).floor() as i64;
        }
        let tour = Tour::new(order.to_vec()).unwrap();
        assert_eq!(tour_length(&inst, &tour).unwrap(), expected);
    }

    #[test]
    fn fingerprint_ignores_name_and_optimum() {
        let a = unit_square();
        let mut b = unit_square().with_optimum(4, Provenance::Exact);
        b.name = "other".into();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = unit_square();
        c.cities[0].x = 1e-9;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    proptest! {
        #[test]
        fn length_invariant_under_rotation_and_reversal(seed in any::<u64>(), n in 3usize..20, shift in 0usize..20) {
            let inst = random_instance(n, seed);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_from(seed ^ 1));
            let base = tour_length(&inst, &Tour::new(order.clone()).unwrap()).unwrap();
            let mut rotated = order.clone();
            rotated.rotate_left(shift % n);
            prop_assert_eq!(tour_length(&inst, &Tour::new(rotated).unwrap()).unwrap(), base);
            let mut reversed = order;
            reversed.reverse();
            prop_assert_eq!(tour_length(&inst, &Tour::new(reversed).unwrap()).unwrap(), base);
        }
    }
}
