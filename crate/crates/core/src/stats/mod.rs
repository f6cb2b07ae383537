//! Two-sample tests on season slices and everything built on them.

mod ad;
mod ks;
mod regression;
mod sample;
mod scan;
mod variation;

pub use ad::{ad_pvalue, ad_two_sample, AdInterpolation, AD_CRITICAL, AD_SIGNIFICANCE};
pub use ks::{kolmogorov_q, ks_pvalue_asymptotic, ks_pvalue_exact, ks_statistic, ks_two_sample, KsStatistic};
pub use regression::{loglog_fit, RegressionFit};
pub use sample::{SampleMode, WeightedSample};
pub use scan::{
    average_curves, extract_anomaly_periods, multi_baseline_scan, pairwise_sum, scan_day, window_scan, AnchorRange,
    AnomalySegment, DayScan, MultiScan, PValueCurve, ScanConfig, ScanOutput, SeasonRef, SkipReason, SkippedWidth,
};
pub use variation::{relative_variation, RelativeVariation};

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ks,
    Ad,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ks => "ks",
            Method::Ad => "ad",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ks" => Ok(Method::Ks),
            "ad" => Ok(Method::Ad),
            _ => Err(contract(alloc::format!("unknown test method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// K-S: D in [0, 1]. A-D: standardized T, unbounded.
    pub statistic: f64,
    pub p_value: f64,
    pub n1: u64,
    pub n2: u64,
    pub method: Method,
}

/// Largest n1·n2 for which the K-S p-value is computed exactly.
pub const DEFAULT_EXACT_MAX_PRODUCT: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestConfig {
    pub sample_mode: SampleMode,
    pub exact_max_product: u64,
    pub ad_interpolation: AdInterpolation,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            sample_mode: SampleMode::MessageMass,
            exact_max_product: DEFAULT_EXACT_MAX_PRODUCT,
            ad_interpolation: AdInterpolation::QuadraticLogFit,
        }
    }
}

/// Runs `method` on two aligned day-count slices.
pub fn run_test(method: Method, a: &[u64], b: &[u64], cfg: &TestConfig) -> Result<TestResult> {
    let sa = WeightedSample::from_slice(a, cfg.sample_mode)?;
    let sb = WeightedSample::from_slice(b, cfg.sample_mode)?;
    match method {
        Method::Ks => Ok(ks_two_sample(&sa, &sb, cfg.exact_max_product)),
        Method::Ad => ad_two_sample(&sa, &sb, cfg.ad_interpolation),
    }
}
