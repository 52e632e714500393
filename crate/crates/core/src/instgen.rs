//! TSP instance generators and the TSP instance mutation operator.
//!
//! `portgen` places cities uniformly at random (a "rue" instance) and
//! `clustered_network` scatters them around random centres. The eight
//! structural generators start from a rue instance drawn from the same seed
//! and then disturb a region or a subset of its points; how far they reach
//! is scaled by `intensity` (see each [`GeneratorKind`] variant).

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{derive_seed, rng_from, tag, SeededRng};
use crate::tsp::{Point, TspInstance};

/// Probability that a city takes the Gaussian-offset branch.
pub const GAUSSIAN_BRANCH_PROBABILITY: f64 = 0.9;
/// Offset standard deviation as a fraction of the coordinate range.
pub const OFFSET_SIGMA_FRACTION: f64 = 0.025;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Uniform placement in the bounding box.
    Portgen,
    /// Uniform placement in discs around `n_clusters` random centres.
    #[serde(rename = "clustered_network")]
    ClusteredNetwork,
    /// Points inside a random disc of radius `intensity * min_side / 2` are
    /// pushed just outside it.
    Explosion,
    /// Points inside a random disc of radius `intensity * min_side / 2` are
    /// pulled towards its centre.
    Implosion,
    /// Each point joins a Gaussian cluster around a random centroid with
    /// probability `intensity`.
    Cluster,
    /// Each point is selected with probability `intensity`; the selection
    /// is rotated about its centroid by a random angle.
    Rotation,
    /// Each point is selected with probability `intensity` and projected
    /// orthogonally onto a random line.
    #[serde(rename = "linearprojection")]
    LinearProjection,
    /// Points within a tube of half-width `intensity * min_side / 4` around a
    /// random line are pushed orthogonally out of the tube.
    Expansion,
    /// Points within a tube of half-width `intensity * min_side / 2` around a
    /// random line are squeezed towards its axis.
    Compression,
    /// The points of a random box with sides `intensity * (w, h)` are
    /// translated to another random position.
    #[serde(rename = "gridmutation")]
    GridMutation,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 10] = [
        GeneratorKind::Portgen,
        GeneratorKind::ClusteredNetwork,
        GeneratorKind::Explosion,
        GeneratorKind::Implosion,
        GeneratorKind::Cluster,
        GeneratorKind::Rotation,
        GeneratorKind::LinearProjection,
        GeneratorKind::Expansion,
        GeneratorKind::Compression,
        GeneratorKind::GridMutation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorKind::Portgen => "portgen",
            GeneratorKind::ClusteredNetwork => "clustered_network",
            GeneratorKind::Explosion => "explosion",
            GeneratorKind::Implosion => "implosion",
            GeneratorKind::Cluster => "cluster",
            GeneratorKind::Rotation => "rotation",
            GeneratorKind::LinearProjection => "linearprojection",
            GeneratorKind::Expansion => "expansion",
            GeneratorKind::Compression => "compression",
            GeneratorKind::GridMutation => "gridmutation",
        }
    }

    pub fn is_structural(&self) -> bool {
        !matches!(
            self,
            GeneratorKind::Portgen | GeneratorKind::ClusteredNetwork
        )
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown generator kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Default for BoundingBox {
    fn default() -> Self {
        BoundingBox {
            x_lo: 0.0,
            x_hi: 1000.0,
            y_lo: 0.0,
            y_hi: 1000.0,
        }
    }
}

impl BoundingBox {
    fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x_lo, self.x_hi),
            p.y.clamp(self.y_lo, self.y_hi),
        )
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(self.x_lo..=self.x_hi),
            rng.random_range(self.y_lo..=self.y_hi),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_cities: usize,
    pub n_clusters: usize,
    /// Cluster disc radius as a fraction of the shorter box side.
    pub cluster_spread: f64,
    /// Reach of the structural operators, in `[0, 1]`.
    pub intensity: f64,
    pub bbox: BoundingBox,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_cities: 100,
            n_clusters: 4,
            cluster_spread: 0.08,
            intensity: 0.3,
            bbox: BoundingBox::default(),
        }
    }
}

impl GeneratorParams {
    pub fn with_cities(n_cities: usize) -> Self {
        GeneratorParams {
            n_cities,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n_cities >= 3,
            "n_cities must be at least 3, got {}",
            self.n_cities
        );
        ensure!(self.n_clusters >= 1, "n_clusters must be at least 1");
        let b = &self.bbox;
        ensure!(
            [b.x_lo, b.x_hi, b.y_lo, b.y_hi]
                .iter()
                .all(|v| v.is_finite())
                && b.x_lo < b.x_hi
                && b.y_lo < b.y_hi,
            "bounding box is degenerate"
        );
        ensure!(
            (0.0..=1.0).contains(&self.intensity),
            "intensity must lie in [0, 1]"
        );
        ensure!(
            self.cluster_spread > 0.0 && self.cluster_spread.is_finite(),
            "cluster_spread must be positive"
        );
        Ok(())
    }
}

/// Result of a structural operator: the new cities and which indices moved.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformed {
    pub cities: Vec<Point>,
    pub moved: Vec<usize>,
}

pub fn generate(kind: GeneratorKind, params: &GeneratorParams, seed: u64) -> Result<TspInstance> {
    params.validate()?;
    let cities = match kind {
        GeneratorKind::Portgen => rue_base(params, seed),
        GeneratorKind::ClusteredNetwork => clustered(params, seed),
        _ => transform(kind, &rue_base(params, seed), params, seed)?.cities,
    };
    TspInstance::new(
        &format!("{}-n{}-s{}", kind.as_str(), params.n_cities, seed),
        cities,
    )
}

/// The uniform base every structural kind starts from; identical to
/// `portgen` output for the same seed.
pub fn rue_base(params: &GeneratorParams, seed: u64) -> Vec<Point> {
    let mut rng = rng_from(derive_seed(seed, &[tag("rue")]));
    (0..params.n_cities)
        .map(|_| params.bbox.sample(&mut rng))
        .collect()
}

fn clustered(params: &GeneratorParams, seed: u64) -> Vec<Point> {
    let mut rng = rng_from(derive_seed(seed, &[tag("clustered")]));
    let centres: Vec<Point> = (0..params.n_clusters)
        .map(|_| params.bbox.sample(&mut rng))
        .collect();
    let radius = params.cluster_spread * params.bbox.min_side();
    (0..params.n_cities)
        .map(|i| {
            let c = centres[i % centres.len()];
            let r = radius * libm::sqrt(rng.random::<f64>());
            let a = rng.random_range(0.0..2.0 * PI);
            // the centre lies in the box, so clamping only shortens the offset
            params
                .bbox
                .clamp(Point::new(c.x + r * libm::cos(a), c.y + r * libm::sin(a)))
        })
        .collect()
}

/// Cluster centres used by `clustered_network` for `seed`, in assignment
/// order (city `i` belongs to centre `i % n_clusters`).
pub fn cluster_centres(params: &GeneratorParams, seed: u64) -> Vec<Point> {
    let mut rng = rng_from(derive_seed(seed, &[tag("clustered")]));
    (0..params.n_clusters)
        .map(|_| params.bbox.sample(&mut rng))
        .collect()
}

struct Line {
    origin: Point,
    dir: (f64, f64),
}

impl Line {
    fn random(bbox: &BoundingBox, rng: &mut SeededRng) -> Line {
        let origin = bbox.sample(rng);
        let a = rng.random_range(0.0..PI);
        Line {
            origin,
            dir: (libm::cos(a), libm::sin(a)),
        }
    }

    /// Signed orthogonal distance and the foot of the perpendicular.
    fn offset(&self, p: Point) -> (f64, Point) {
        let (dx, dy) = (p.x - self.origin.x, p.y - self.origin.y);
        let along = dx * self.dir.0 + dy * self.dir.1;
        let across = -dx * self.dir.1 + dy * self.dir.0;
        let foot = Point::new(
            self.origin.x + along * self.dir.0,
            self.origin.y + along * self.dir.1,
        );
        (across, foot)
    }

    fn at(&self, foot: Point, across: f64) -> Point {
        Point::new(foot.x - across * self.dir.1, foot.y + across * self.dir.0)
    }
}

fn exponential(rng: &mut SeededRng, mean: f64) -> f64 {
    let u: f64 = rng.random::<f64>();
    -libm::log(1.0 - u) * mean
}

/// Applies a structural operator to `base`. Points not listed in `moved`
/// are returned bit-identical.
pub fn transform(
    kind: GeneratorKind,
    base: &[Point],
    params: &GeneratorParams,
    seed: u64,
) -> Result<Transformed> {
    params.validate()?;
    ensure!(
        kind.is_structural(),
        "{} is not a structural operator",
        kind.as_str()
    );
    let mut rng = rng_from(derive_seed(seed, &[tag("structural"), tag(kind.as_str())]));
    let bbox = params.bbox;
    let m = bbox.min_side();
    let iota = params.intensity;
    let mut cities = base.to_vec();
    let mut moved = Vec::new();
    match kind {
        GeneratorKind::Explosion => {
            let c = bbox.sample(&mut rng);
            let r = iota * 0.5 * m;
            for (i, p) in cities.iter_mut().enumerate() {
                let d = p.dist(&c);
                if d < r {
                    let (ux, uy) = if d > 0.0 {
                        ((p.x - c.x) / d, (p.y - c.y) / d)
                    } else {
                        let a = rng.random_range(0.0..2.0 * PI);
                        (libm::cos(a), libm::sin(a))
                    };
                    let to = r + exponential(&mut rng, 0.02 * m);
                    *p = Point::new(c.x + ux * to, c.y + uy * to);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Implosion => {
            let c = bbox.sample(&mut rng);
            let r = iota * 0.5 * m;
            for (i, p) in cities.iter_mut().enumerate() {
                let d = p.dist(&c);
                if d < r && d > 0.0 {
                    let f = d / r;
                    *p = Point::new(c.x + (p.x - c.x) * f, c.y + (p.y - c.y) * f);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Cluster => {
            let c = bbox.sample(&mut rng);
            let spread = Normal::new(0.0, 0.05 * m).map_err(|e| Error::invalid(format!("{e}")))?;
            for (i, p) in cities.iter_mut().enumerate() {
                if rng.random_bool(iota) {
                    let q =
                        Point::new(c.x + spread.sample(&mut rng), c.y + spread.sample(&mut rng));
                    *p = bbox.clamp(q);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Rotation => {
            let selected: Vec<usize> = (0..cities.len())
                .filter(|_| rng.random_bool(iota))
                .collect();
            if !selected.is_empty() {
                let k = selected.len() as f64;
                let cx = selected.iter().map(|&i| cities[i].x).sum::<f64>() / k;
                let cy = selected.iter().map(|&i| cities[i].y).sum::<f64>() / k;
                let a = rng.random_range(0.0..2.0 * PI);
                let (s, co) = (libm::sin(a), libm::cos(a));
                for &i in &selected {
                    let p = cities[i];
                    let (dx, dy) = (p.x - cx, p.y - cy);
                    cities[i] = Point::new(cx + co * dx - s * dy, cy + s * dx + co * dy);
                }
                moved = selected;
            }
        }
        GeneratorKind::LinearProjection => {
            let line = Line::random(&bbox, &mut rng);
            for (i, p) in cities.iter_mut().enumerate() {
                if rng.random_bool(iota) {
                    let (_, foot) = line.offset(*p);
                    *p = bbox.clamp(foot);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Expansion => {
            let line = Line::random(&bbox, &mut rng);
            let half = iota * 0.25 * m;
            for (i, p) in cities.iter_mut().enumerate() {
                let (across, foot) = line.offset(*p);
                if across.abs() < half {
                    let side = if across > 0.0 {
                        1.0
                    } else if across < 0.0 {
                        -1.0
                    } else if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    };
                    *p = line.at(foot, side * (half + exponential(&mut rng, 0.02 * m)));
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Compression => {
            let line = Line::random(&bbox, &mut rng);
            let half = iota * 0.5 * m;
            for (i, p) in cities.iter_mut().enumerate() {
                let (across, foot) = line.offset(*p);
                if across.abs() < half && across != 0.0 {
                    let squeeze: f64 = rng.random::<f64>();
                    *p = line.at(foot, across * squeeze);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::GridMutation => {
            let (bw, bh) = (iota * bbox.width(), iota * bbox.height());
            let ox = rng.random_range(bbox.x_lo..=bbox.x_hi - bw);
            let oy = rng.random_range(bbox.y_lo..=bbox.y_hi - bh);
            let tx = rng.random_range(bbox.x_lo..=bbox.x_hi - bw);
            let ty = rng.random_range(bbox.y_lo..=bbox.y_hi - bh);
            for (i, p) in cities.iter_mut().enumerate() {
                if p.x >= ox && p.x <= ox + bw && p.y >= oy && p.y <= oy + bh {
                    *p = Point::new(p.x - ox + tx, p.y - oy + ty);
                    moved.push(i);
                }
            }
        }
        GeneratorKind::Portgen | GeneratorKind::ClusteredNetwork => unreachable!(),
    }
    Ok(Transformed { cities, moved })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutationBranch {
    Gaussian,
    Uniform,
}

/// Coordinate ranges and offset scales shared by the TSP and VRPSPDTW
/// mutators; extrema are taken once over the input.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CoordinateMutator {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    x_offset: Normal<f64>,
    y_offset: Normal<f64>,
}

impl CoordinateMutator {
    pub(crate) fn new(points: impl Iterator<Item = Point>) -> Result<Self> {
        let (x_min, x_max, y_min, y_max) = points.fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
        );
        ensure!(
            x_min.is_finite() && y_min.is_finite(),
            "no finite coordinates to mutate"
        );
        let normal = |range: f64| {
            Normal::new(0.0, OFFSET_SIGMA_FRACTION * range)
                .map_err(|e| Error::invalid(format!("{e}")))
        };
        Ok(CoordinateMutator {
            x_min,
            x_max,
            y_min,
            y_max,
            x_offset: normal(x_max - x_min)?,
            y_offset: normal(y_max - y_min)?,
        })
    }

    pub(crate) fn mutate(&self, p: Point, rng: &mut SeededRng) -> (Point, MutationBranch) {
        let r: f64 = rng.random::<f64>();
        if r <= GAUSSIAN_BRANCH_PROBABILITY {
            let dx = self.x_offset.sample(rng);
            let dy = self.y_offset.sample(rng);
            (Point::new(p.x + dx, p.y + dy), MutationBranch::Gaussian)
        } else {
            let x = rng.random_range(self.x_min..=self.x_max);
            let y = rng.random_range(self.y_min..=self.y_max);
            (Point::new(x, y), MutationBranch::Uniform)
        }
    }
}

/// Perturbs every city: with probability 0.9 a Gaussian offset with standard
/// deviation 0.025 of the coordinate range, otherwise a uniform redraw
/// within the range. Offsets are not clamped. The reference optimum is
/// dropped because it no longer applies.
pub fn mutate_tsp(instance: &TspInstance, seed: u64) -> Result<TspInstance> {
    Ok(mutate_tsp_traced(instance, seed)?.0)
}

/// [`mutate_tsp`] that also reports which branch each city took.
pub fn mutate_tsp_traced(
    instance: &TspInstance,
    seed: u64,
) -> Result<(TspInstance, Vec<MutationBranch>)> {
    ensure!(instance.len() >= 3, "instance has fewer than 3 cities");
    let mutator = CoordinateMutator::new(instance.cities.iter().copied())?;
    let mut rng = rng_from(derive_seed(seed, &[tag("mutate-tsp")]));
    let mut branches = Vec::with_capacity(instance.len());
    let cities = instance
        .cities
        .iter()
        .map(|&p| {
            let (q, b) = mutator.mutate(p, &mut rng);
            branches.push(b);
            q
        })
        .collect();
    let out = TspInstance {
        name: instance.name.to_string(),
        cities,
        reference_optimum: None,
    };
    Ok((out, branches))
}
