use alloc::format;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure, Error, Result};
use crate::instgen::{CoordinateMutator, OFFSET_SIGMA_FRACTION};
use crate::rng::{derive_seed, rng_from, tag};
use crate::tsp::Point;

use super::instance::{Customer, VrpInstance};

/// Perturbs every customer; depot and fleet are copied unchanged.
///
/// Coordinates follow the TSP mutation. Delivery and pickup are redrawn
/// uniformly within the input's observed ranges. Both window ends receive
/// independent Gaussian offsets with standard deviation 0.025 of the depot
/// horizon; a window left inverted is swapped and then clipped to the
/// horizon.
pub fn mutate_vrp(instance: &VrpInstance, seed: u64) -> Result<VrpInstance> {
    ensure!(!instance.customers.is_empty(), "instance has no customers");
    let coords = CoordinateMutator::new(instance.customers.iter().map(Customer::point))?;
    let range = |f: fn(&Customer) -> f64| {
        instance
            .customers
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (d_min, d_max) = range(|c| c.delivery);
    let (p_min, p_max) = range(|c| c.pickup);
    let (a0, b0) = (instance.depot.a, instance.depot.b);
    let window = Normal::new(0.0, OFFSET_SIGMA_FRACTION * (b0 - a0))
        .map_err(|e| Error::invalid(format!("{e}")))?;

    let mut rng = rng_from(derive_seed(seed, &[tag("mutate-vrp")]));
    let mut out = instance.clone();
    for c in out.customers.iter_mut() {
        let (p, _) = coords.mutate(Point::new(c.x, c.y), &mut rng);
        c.x = p.x;
        c.y = p.y;
        c.delivery = rng.random_range(d_min..=d_max);
        c.pickup = rng.random_range(p_min..=p_max);
        let mut a = c.a + window.sample(&mut rng);
        let mut b = c.b + window.sample(&mut rng);
        if a > b {
            core::mem::swap(&mut a, &mut b);
        }
        c.a = a.clamp(a0, b0);
        c.b = b.clamp(a0, b0);
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::instance::tests::{customer, instance};
    use super::*;
    use alloc::vec::Vec;

    fn sample_instance(n: usize) -> VrpInstance {
        let mut rng = rng_from(5);
        let custs = (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..800.0);
                customer(
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..100.0),
                    rng.random_range(2.0..20.0),
                    rng.random_range(1.0..15.0),
                    a,
                    a + rng.random_range(10.0..200.0),
                    5.0,
                )
            })
            .collect();
        instance(custs, 4, 100.0)
    }

    #[test]
    fn depot_and_fleet_never_change() {
        let inst = sample_instance(20);
        for seed in 0..1000 {
            let m = mutate_vrp(&inst, seed).unwrap();
            assert_eq!(m.depot, inst.depot);
            assert_eq!(m.fleet, inst.fleet);
            assert_eq!(m.len(), inst.len());
            for c in &m.customers {
                assert!(inst.depot.a <= c.a && c.a <= c.b && c.b <= inst.depot.b);
                assert!(c.delivery >= 0.0 && c.pickup >= 0.0);
            }
        }
    }

    #[test]
    fn pickups_are_uniform_on_the_observed_range() {
        let inst = sample_instance(1000);
        let (lo, hi) = inst
            .customers
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| {
                (l.min(c.pickup), h.max(c.pickup))
            });
        let mut values: Vec<f64> = (0..100)
            .flat_map(|seed| {
                mutate_vrp(&inst, seed)
                    .unwrap()
                    .customers
                    .into_iter()
                    .map(|c| c.pickup)
            })
            .collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let d = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cdf = (v - lo) / (hi - lo);
                (cdf - i as f64 / n)
                    .abs()
                    .max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at significance 0.01
        let critical = 1.628 / libm::sqrt(n);
        assert!(d < critical, "D = {d}, critical = {critical}");
    }

    #[test]
    fn window_offsets_scale_with_the_horizon() {
        let mut inst = sample_instance(1);
        inst.customers[0].a = 400.0;
        inst.customers[0].b = 600.0;
        let sigma = 0.025 * (inst.depot.b - inst.depot.a);
        let offs: Vec<f64> = (0..20_000)
            .map(|s| mutate_vrp(&inst, s).unwrap().customers[0].a - 400.0)
            .collect();
        let mean = offs.iter().sum::<f64>() / offs.len() as f64;
        let sd = libm::sqrt(
            offs.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / (offs.len() - 1) as f64,
        );
        assert!((sd / sigma - 1.0).abs() < 0.03, "sd {sd} vs {sigma}");
    }
}
