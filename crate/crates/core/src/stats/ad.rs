//! k-sample Anderson–Darling test (k = 2) with midrank ties, standardized
//! by its exact mean and variance under the null.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sample::{pooled, WeightedSample};
use super::{Method, TestResult};
use crate::error::{Error, Result};

/// Significance levels of the two-sample critical values.
pub const AD_SIGNIFICANCE: [f64; 7] = [0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001];

/// Standardized critical values for one degree of freedom (k − 1 = 1),
/// each the sum b0 + b1 + b2 of the published interpolation coefficients.
pub const AD_CRITICAL: [f64; 7] = [
    0.675 - 0.245 - 0.105,
    1.281 + 0.25 - 0.305,
    1.645 + 0.678 - 0.362,
    1.96 + 1.149 - 0.391,
    2.326 + 1.822 - 0.396,
    2.573 + 2.364 - 0.345,
    3.085 + 3.615 - 0.154,
];

const P_MAX: f64 = 0.25;
const P_MIN: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdInterpolation {
    /// Least-squares quadratic in T through ln(significance).
    QuadraticLogFit,
    /// Linear in T through ln(significance) between adjacent critical values.
    PiecewiseLogLinear,
}

/// Coefficients (c0, c1, c2) of ln p ≈ c0 + c1·T + c2·T².
fn quadratic_coefficients() -> [f64; 3] {
    // Normal equations for the 7 knots, solved by Gaussian elimination.
    let mut m = [[0f64; 4]; 3];
    for (&x, &s) in AD_CRITICAL.iter().zip(&AD_SIGNIFICANCE) {
        let y = libm::log(s);
        let pw = [1.0, x, x * x, x * x * x, x * x * x * x];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += pw[r + c];
            }
            m[r][3] += pw[r] * y;
        }
    }
    #[allow(clippy::needless_range_loop)]
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap_or(col);
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]]
}

/// p-value of a standardized two-sample statistic, clamped to
/// [0.001, 0.25]: below the first critical value it is 0.25, above the last
/// it is 0.001.
pub fn ad_pvalue(t: f64, method: AdInterpolation) -> f64 {
    let (lo, hi) = (AD_CRITICAL[0], AD_CRITICAL[6]);
    if t.is_nan() || t < lo {
        return P_MAX;
    }
    if t > hi {
        return P_MIN;
    }
    let p = match method {
        AdInterpolation::QuadraticLogFit => {
            let [c0, c1, c2] = quadratic_coefficients();
            libm::exp(c0 + c1 * t + c2 * t * t)
        }
        AdInterpolation::PiecewiseLogLinear => {
            let k = AD_CRITICAL.windows(2).position(|w| t <= w[1]).unwrap_or(5);
            let (x0, x1) = (AD_CRITICAL[k], AD_CRITICAL[k + 1]);
            let (y0, y1) = (libm::log(AD_SIGNIFICANCE[k]), libm::log(AD_SIGNIFICANCE[k + 1]));
            if t == x0 {
                AD_SIGNIFICANCE[k]
            } else if t == x1 {
                AD_SIGNIFICANCE[k + 1]
            } else {
                libm::exp(y0 + (y1 - y0) * (t - x0) / (x1 - x0))
            }
        }
    };
    p.clamp(P_MIN, P_MAX)
}

/// Unstandardized midrank A²ₐₖₙ for two samples.
fn a2_midrank(blocks: &[(u64, u64, u64)], n: [f64; 2]) -> Option<f64> {
    let total = n[0] + n[1];
    let mut below = 0f64;
    let mut cum = [0f64; 2];
    let mut sums = [0f64; 2];
    for &(_, wa, wb) in blocks {
        let f = [wa as f64, wb as f64];
        let l = f[0] + f[1];
        let bj = below + l / 2.0;
        let denom = bj * (total - bj) - total * l / 4.0;
        if denom <= 0.0 {
            return None;
        }
        for i in 0..2 {
            let m = cum[i] + f[i] - f[i] / 2.0;
            let dev = total * m - bj * n[i];
            sums[i] += l / total * dev * dev / denom;
            cum[i] += f[i];
        }
        below += l;
    }
    Some((total - 1.0) / total * (sums[0] / n[0] + sums[1] / n[1]))
}

/// Null variance of A²ₐₖₙ for k samples of total size `total`.
fn a2_variance(sizes: &[f64], total: f64) -> f64 {
    let k = sizes.len() as f64;
    let big_h: f64 = sizes.iter().map(|n| 1.0 / n).sum();
    let count = total as usize;
    // hs[m] = Σ_{i=1}^{m+1} 1/(N − i), for m = 0..N−3.
    let hs: Vec<f64> = (1..count - 1)
        .scan(0.0, |acc, i| {
            *acc += 1.0 / (total - i as f64);
            Some(*acc)
        })
        .collect();
    // Harmonic number H_{N−1}.
    let h = hs.last().copied().unwrap_or(0.0) + 1.0;
    let g: f64 = hs.iter().enumerate().map(|(m, v)| v / (m as f64 + 2.0)).sum();
    let a = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * big_h;
    let b = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * big_h - 8.0 * h + 4.0 * g - 6.0;
    let c = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k + (2.0 * h - 6.0) * big_h + 4.0 * h;
    let d = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    (a * total * total * total + b * total * total + c * total + d) / ((total - 1.0) * (total - 2.0) * (total - 3.0))
}

/// Standardized statistic T = (A² − (k − 1))/σ and its interpolated p.
///
/// A pooled sample on a single value has no discrepancy to measure: T = 0
/// and p = 0.25.
pub fn ad_two_sample(a: &WeightedSample, b: &WeightedSample, method: AdInterpolation) -> Result<TestResult> {
    let total = a.n() + b.n();
    if total < 4 {
        return Err(Error::SampleTooSmall(total));
    }
    let n = [a.n() as f64, b.n() as f64];
    let blocks = pooled(a, b);
    let result =
        |statistic: f64, p_value: f64| TestResult { statistic, p_value, n1: a.n(), n2: b.n(), method: Method::Ad };
    let Some(a2) = a2_midrank(&blocks, n) else {
        return Ok(result(0.0, P_MAX));
    };
    let sigma = libm::sqrt(a2_variance(&n, total as f64));
    let t = (a2 - 1.0) / sigma;
    Ok(result(t, ad_pvalue(t, method)))
}
