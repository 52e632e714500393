use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::fingerprint::Fingerprint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Success,
    Timeout,
    Infeasible,
}

/// The result of one seeded solver execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// Seconds; equals `cutoff` on timeout.
    pub elapsed: f64,
    /// Tour length (TSP) or solution cost (VRPSPDTW).
    pub quality: Option<f64>,
    pub seed: u64,
    pub cutoff: f64,
}

impl RunOutcome {
    pub fn success(elapsed: f64, quality: f64, seed: u64, cutoff: f64) -> Self {
        RunOutcome {
            status: RunStatus::Success,
            elapsed,
            quality: Some(quality),
            seed,
            cutoff,
        }
    }

    pub fn timeout(seed: u64, cutoff: f64) -> Self {
        RunOutcome {
            status: RunStatus::Timeout,
            elapsed: cutoff,
            quality: None,
            seed,
            cutoff,
        }
    }

    pub fn infeasible(elapsed: f64, seed: u64, cutoff: f64) -> Self {
        RunOutcome {
            status: RunStatus::Infeasible,
            elapsed,
            quality: None,
            seed,
            cutoff,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Success
    }

    pub fn check(&self) -> Result<()> {
        ensure!(
            self.elapsed >= 0.0 && self.elapsed.is_finite(),
            "elapsed must be a non-negative number"
        );
        match self.status {
            RunStatus::Success => {
                ensure!(self.quality.is_some(), "successful run without quality");
                ensure!(self.elapsed <= self.cutoff, "successful run exceeds cutoff");
            }
            RunStatus::Timeout => ensure!(
                self.elapsed == self.cutoff,
                "timeout must report elapsed = cutoff"
            ),
            RunStatus::Infeasible => {}
        }
        Ok(())
    }

    /// Bitwise equality, used for determinism checks (NaN-safe, sign-aware).
    pub fn bit_eq(&self, other: &RunOutcome) -> bool {
        self.status == other.status
            && self.elapsed.to_bits() == other.elapsed.to_bits()
            && self.quality.map(f64::to_bits) == other.quality.map(f64::to_bits)
            && self.seed == other.seed
            && self.cutoff.to_bits() == other.cutoff.to_bits()
    }
}

/// Cache key of one measurement f(s, θ) under a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub config: Fingerprint,
    pub instance: Fingerprint,
    pub seed: u64,
}
