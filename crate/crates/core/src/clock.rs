//! Time accounting for solver runs.
//!
//! By default a run's elapsed time is counted in work units (one unit per
//! move or insertion evaluation) and converted to seconds with
//! [`WORK_UNIT_SECONDS`], which makes runtimes bit-reproducible. A wall
//! clock can be injected instead for realistic benchmarking.

use alloc::sync::Arc;
use core::fmt;

/// Seconds charged per work unit.
pub const WORK_UNIT_SECONDS: f64 = 1e-6;

/// A monotonic clock reporting seconds since an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

#[derive(Clone, Default)]
pub enum TimeSource {
    #[default]
    WorkUnits,
    Wall(Arc<dyn Clock>),
}

impl fmt::Debug for TimeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSource::WorkUnits => f.write_str("WorkUnits"),
            TimeSource::Wall(_) => f.write_str("Wall"),
        }
    }
}

/// Per-run stopwatch. Work is always counted; in wall mode the clock
/// overrides the unit count when reporting elapsed time.
#[derive(Debug)]
pub struct Stopwatch {
    source: TimeSource,
    start: f64,
    units: u64,
    budget_units: u64,
    cutoff: f64,
}

impl Stopwatch {
    pub fn new(source: &TimeSource, cutoff: f64) -> Self {
        let start = match source {
            TimeSource::WorkUnits => 0.0,
            TimeSource::Wall(c) => c.now(),
        };
        let budget = cutoff / WORK_UNIT_SECONDS;
        let budget_units = if budget >= u64::MAX as f64 {
            u64::MAX
        } else {
            // floor without std
            budget as u64
        };
        Stopwatch {
            source: source.clone(),
            start,
            units: 0,
            budget_units,
            cutoff,
        }
    }

    #[inline]
    pub fn charge(&mut self, units: u64) {
        self.units = self.units.saturating_add(units);
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn elapsed(&self) -> f64 {
        match &self.source {
            TimeSource::WorkUnits => self.units as f64 * WORK_UNIT_SECONDS,
            TimeSource::Wall(c) => c.now() - self.start,
        }
    }

    pub fn expired(&self) -> bool {
        match &self.source {
            TimeSource::WorkUnits => self.units > self.budget_units,
            TimeSource::Wall(_) => self.elapsed() > self.cutoff,
        }
    }
}
