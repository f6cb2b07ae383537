use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Least-squares line through (ln x, ln y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// In [0, 1]; 1 when the responses are constant.
    pub r2: f64,
    pub n_points: usize,
}

impl RegressionFit {
    /// Fitted y in raw space.
    pub fn predict(&self, x: f64) -> f64 {
        libm::exp(self.intercept + self.slope * libm::log(x))
    }
}

pub fn loglog_fit(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 3 {
        return Err(contract("log-log fit needs at least 3 points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(contract("log-log fit needs positive finite coordinates"));
    }
    let n = points.len() as f64;
    let logs = || points.iter().map(|&(x, y)| (libm::log(x), libm::log(y)));
    let (sx, sy) = logs().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in logs() {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs()
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { (1.0f64 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RegressionFit { slope, intercept, r2, n_points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_line() {
        let f = loglog_fit(&[(1.0, 1.0), (10.0, 10.0), (100.0, 100.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn power_law() {
        let pts: alloc::vec::Vec<_> =
            (1..=8).map(|i| (i as f64 * 1000.0, 0.02 * libm::pow(i as f64 * 1000.0, 0.8))).collect();
        let f = loglog_fit(&pts).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.predict(5000.0) - 0.02 * libm::pow(5000.0, 0.8)).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert_eq!(loglog_fit(&[(2.0, 1.0), (2.0, 3.0), (2.0, 5.0)]), Err(Error::DegenerateRegression));
        assert!(loglog_fit(&[(1.0, 1.0), (0.0, 2.0), (3.0, 3.0)]).is_err());
        assert!(loglog_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }
}
