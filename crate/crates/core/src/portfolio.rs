//! Portfolios and the two aggregation rules: a portfolio scores the best
//! (minimum) of its members on an instance, and a solver scores the mean of
//! its per-instance scores over a set.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::fingerprint::Fingerprint;
use crate::params::Configuration;

pub const DEFAULT_MAX_SIZE: usize = 4;

/// Score of a portfolio on one instance: the minimum member score.
pub fn portfolio_score(member_scores: &[f64]) -> Result<f64> {
    ensure!(
        !member_scores.is_empty(),
        "portfolio_score of an empty list"
    );
    Ok(member_scores.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Score of a solver on an instance set: the arithmetic mean.
pub fn set_score(per_instance: &[f64]) -> Result<f64> {
    ensure!(!per_instance.is_empty(), "set_score of an empty list");
    Ok(per_instance.iter().sum::<f64>() / per_instance.len() as f64)
}

/// Median of an odd-length list.
pub fn median(values: &[f64]) -> Result<f64> {
    ensure!(
        values.len() % 2 == 1,
        "median needs an odd number of values, got {}",
        values.len()
    );
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[v.len() / 2])
}

/// An ordered set of pairwise-distinct configurations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Portfolio {
    members: Vec<Configuration>,
}

impl Portfolio {
    pub fn new(members: Vec<Configuration>) -> Result<Self> {
        Self::with_max_size(members, usize::MAX)
    }

    pub fn with_max_size(members: Vec<Configuration>, max_size: usize) -> Result<Self> {
        ensure!(!members.is_empty(), "a portfolio needs at least one member");
        ensure!(
            members.len() <= max_size,
            "portfolio of {} members exceeds the maximum {max_size}",
            members.len()
        );
        for (i, m) in members.iter().enumerate() {
            ensure!(
                !members[..i]
                    .iter()
                    .any(|o| o.fingerprint() == m.fingerprint()),
                "duplicate portfolio member {}",
                m.fingerprint().short()
            );
        }
        Ok(Portfolio { members })
    }

    pub fn members(&self) -> &[Configuration] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fingerprints(&self) -> Vec<Fingerprint> {
        self.members
            .iter()
            .map(Configuration::fingerprint)
            .collect()
    }

    pub fn contains(&self, fp: Fingerprint) -> bool {
        self.members.iter().any(|m| m.fingerprint() == fp)
    }

    /// Members other than the one at `index`.
    pub fn without(&self, index: usize) -> Vec<Configuration> {
        self.members
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, m)| m.clone())
            .collect()
    }

    pub fn into_members(self) -> Vec<Configuration> {
        self.members
    }
}

impl<'de> Deserialize<'de> for Portfolio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            members: Vec<Configuration>,
        }
        let raw = Raw::deserialize(d)?;
        Portfolio::new(raw.members).map_err(serde::de::Error::custom)
    }
}
