use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// How a day-count slice becomes a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Each message is one observation of its day offset.
    MessageMass,
    /// Each day is one observation of its count.
    DayLevel,
}

/// Integer-weighted empirical distribution.
///
/// `support` is strictly increasing and every weight is positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSample {
    support: Vec<u64>,
    weights: Vec<u64>,
    n: u64,
}

impl WeightedSample {
    pub fn new(support: Vec<u64>, weights: Vec<u64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(contract("support and weights differ in length"));
        }
        if support.windows(2).any(|p| p[0] >= p[1]) {
            return Err(contract("support must be strictly increasing"));
        }
        let (support, weights): (Vec<_>, Vec<_>) = support.into_iter().zip(weights).filter(|&(_, w)| w > 0).unzip();
        let n = weights.iter().sum();
        if n == 0 {
            return Err(Error::EmptyWindowSample);
        }
        Ok(WeightedSample { support, weights, n })
    }

    /// Day offsets `0..counts.len()` weighted by the counts.
    pub fn from_day_counts(counts: &[u64]) -> Result<Self> {
        WeightedSample::new((0..counts.len() as u64).collect(), counts.to_vec())
    }

    /// The counts themselves as observations, one per day.
    pub fn from_daily_values(counts: &[u64]) -> Result<Self> {
        let mut mult = BTreeMap::new();
        for &c in counts {
            *mult.entry(c).or_insert(0u64) += 1;
        }
        let (support, weights) = mult.into_iter().unzip();
        WeightedSample::new(support, weights)
    }

    pub fn from_slice(counts: &[u64], mode: SampleMode) -> Result<Self> {
        match mode {
            SampleMode::MessageMass => WeightedSample::from_day_counts(counts),
            SampleMode::DayLevel => WeightedSample::from_daily_values(counts),
        }
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Expanded observations in ascending order.
    pub fn expand(&self) -> Vec<u64> {
        self.support.iter().zip(&self.weights).flat_map(|(&v, &w)| core::iter::repeat_n(v, w as usize)).collect()
    }
}

/// Pooled support of two samples with each sample's weight per value.
pub(crate) fn pooled(a: &WeightedSample, b: &WeightedSample) -> Vec<(u64, u64, u64)> {
    let mut out = Vec::with_capacity(a.support.len() + b.support.len());
    let (mut i, mut j) = (0, 0);
    while i < a.support.len() || j < b.support.len() {
        let va = a.support.get(i).copied().unwrap_or(u64::MAX);
        let vb = b.support.get(j).copied().unwrap_or(u64::MAX);
        let in_a = i < a.support.len() && (j >= b.support.len() || va <= vb);
        let in_b = j < b.support.len() && (i >= a.support.len() || vb <= va);
        let v = if in_a { va } else { vb };
        let wa = if in_a { a.weights[i] } else { 0 };
        let wb = if in_b { b.weights[j] } else { 0 };
        out.push((v, wa, wb));
        i += in_a as usize;
        j += in_b as usize;
    }
    out
}
