use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeVariation {
    Value(f64),
    /// No prior users and at least one now.
    New,
}

impl RelativeVariation {
    /// Sort key: `New` above every finite value.
    pub fn rank(&self) -> f64 {
        match self {
            RelativeVariation::Value(v) => *v,
            RelativeVariation::New => f64::INFINITY,
        }
    }
}

impl fmt::Display for RelativeVariation {
    /// Two decimals, or `new`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelativeVariation::Value(v) => write!(f, "{v:.2}"),
            RelativeVariation::New => f.write_str("new"),
        }
    }
}

/// (now − prior)/prior; 0 when both are 0.
pub fn relative_variation(n_now: i64, n_prior: i64) -> Result<RelativeVariation> {
    if n_now < 0 || n_prior < 0 {
        return Err(contract("counts must be nonnegative"));
    }
    Ok(match (n_now, n_prior) {
        (0, 0) => RelativeVariation::Value(0.0),
        (_, 0) => RelativeVariation::New,
        _ => RelativeVariation::Value((n_now - n_prior) as f64 / n_prior as f64),
    })
}
