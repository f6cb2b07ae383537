//! Two-sample Kolmogorov–Smirnov test on integer-weighted samples.
//!
//! D is kept as the integer numerator `max |A·n2 − B·n1|` over pooled
//! checkpoints, where A and B are the cumulative weights of each sample, so
//! that exact p-values compare statistics without rounding.

use alloc::vec;
use alloc::vec::Vec;

use super::sample::{pooled, WeightedSample};
use super::{Method, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KsStatistic {
    /// D·n1·n2.
    pub numerator: u128,
    pub n1: u64,
    pub n2: u64,
}

impl KsStatistic {
    pub fn d(&self) -> f64 {
        self.numerator as f64 / (self.n1 as f64 * self.n2 as f64)
    }
}

pub fn ks_statistic(a: &WeightedSample, b: &WeightedSample) -> KsStatistic {
    let (n1, n2) = (a.n() as u128, b.n() as u128);
    let (mut ca, mut cb, mut best) = (0u128, 0u128, 0u128);
    for (_, wa, wb) in pooled(a, b) {
        ca += wa as u128;
        cb += wb as u128;
        best = best.max((ca * n2).abs_diff(cb * n1));
    }
    KsStatistic { numerator: best, n1: a.n(), n2: b.n() }
}

/// Pooled tie-block sizes, in support order.
fn tie_blocks(a: &WeightedSample, b: &WeightedSample) -> Vec<u64> {
    pooled(a, b).into_iter().map(|(_, wa, wb)| wa + wb).collect()
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(c)
}

/// Exact P(D' ≥ D) over all relabellings of the pooled observations.
///
/// Walks the lattice of label sequences in pooled order and checks the
/// statistic only where a tie block ends, since inside a block the order of
/// labels is arbitrary. Path counts are exact integers while C(N, n1) fits a
/// `u128`; beyond that the walk carries probabilities instead.
pub fn ks_pvalue_exact(a: &WeightedSample, b: &WeightedSample) -> f64 {
    let stat = ks_statistic(a, b);
    if stat.numerator == 0 {
        return 1.0;
    }
    // Track the smaller sample on the lattice axis.
    let (n1, n2) = if a.n() <= b.n() { (a.n(), b.n()) } else { (b.n(), a.n()) };
    let blocks = tie_blocks(a, b);
    let inside = |c: u64, i: u64| -> bool {
        let x = i as u128 * n2 as u128;
        let y = (c - i) as u128 * n1 as u128;
        x.abs_diff(y) < stat.numerator
    };
    let total_n = n1 + n2;
    match binomial_u128(total_n, n1) {
        Some(total) => {
            // paths[i]: label sequences so far with i from the smaller sample.
            let mut paths = vec![0u128; n1 as usize + 1];
            paths[0] = 1;
            let mut c = 0u64;
            for &t in &blocks {
                for _ in 0..t {
                    for i in (0..=n1.min(c + 1)).rev() {
                        let stay = if i <= c && c - i < n2 { paths[i as usize] } else { 0 };
                        let up = if i > 0 { paths[i as usize - 1] } else { 0 };
                        paths[i as usize] = stay + up;
                    }
                    c += 1;
                }
                for i in 0..=n1.min(c) {
                    if !inside(c, i) {
                        paths[i as usize] = 0;
                    }
                }
            }
            let kept = paths[n1 as usize];
            (total - kept) as f64 / total as f64
        }
        None => {
            // Same walk over probabilities of drawing without replacement.
            let mut prob = vec![0f64; n1 as usize + 1];
            prob[0] = 1.0;
            let mut c = 0u64;
            for &t in &blocks {
                for _ in 0..t {
                    let left = (total_n - c) as f64;
                    for i in (0..=n1.min(c + 1)).rev() {
                        let stay =
                            if i <= c && c - i < n2 { prob[i as usize] * (n2 - (c - i)) as f64 / left } else { 0.0 };
                        let up = if i > 0 { prob[i as usize - 1] * (n1 - (i - 1)) as f64 / left } else { 0.0 };
                        prob[i as usize] = stay + up;
                    }
                    c += 1;
                }
                for i in 0..=n1.min(c) {
                    if !inside(c, i) {
                        prob[i as usize] = 0.0;
                    }
                }
            }
            (1.0 - prob[n1 as usize]).clamp(0.0, 1.0)
        }
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    use core::f64::consts::PI;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form; converges fast for small arguments.
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += libm::exp(-m * m * PI * PI / (8.0 * lambda * lambda));
        }
        cdf *= libm::sqrt(2.0 * PI) / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = libm::exp(-2.0 * kf * kf * lambda * lambda);
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p: Q(√nₑ·D), nₑ = n1·n2/(n1+n2).
pub fn ks_pvalue_asymptotic(stat: &KsStatistic) -> f64 {
    if stat.numerator == 0 {
        return 1.0;
    }
    let (n1, n2) = (stat.n1 as f64, stat.n2 as f64);
    let ne = libm::sqrt(n1 * n2 / (n1 + n2));
    let lambda = ne * stat.d();
    kolmogorov_q(lambda).max(f64::MIN_POSITIVE)
}

/// Exact p when n1·n2 ≤ `exact_max_product`, asymptotic otherwise.
pub fn ks_two_sample(a: &WeightedSample, b: &WeightedSample, exact_max_product: u64) -> TestResult {
    let stat = ks_statistic(a, b);
    let exact = (a.n() as u128 * b.n() as u128) <= exact_max_product as u128;
    let p_value = if stat.numerator == 0 {
        1.0
    } else if exact {
        ks_pvalue_exact(a, b).max(f64::MIN_POSITIVE)
    } else {
        ks_pvalue_asymptotic(&stat)
    };
    TestResult { statistic: stat.d(), p_value, n1: a.n(), n2: b.n(), method: Method::Ks }
}
