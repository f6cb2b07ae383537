//! Moving-window comparison of a focal season against baseline seasons.
//!
//! For each focal day d and each width w the two windows are the w calendar
//! positions ending at d's month-day, one in each season. A day's p-value is
//! the arithmetic mean over the widths that could be tested.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{run_test, Method, TestConfig};
use crate::error::{contract, Error, Result};
use crate::timeseries::{positions, positions_back, slice_positions, DailySeries, MonthDay};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub w_min: u32,
    pub w_max: u32,
    pub method: Method,
    pub test: TestConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { w_min: 50, w_max: 70, method: Method::Ks, test: TestConfig::default() }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_min == 0 || self.w_min > self.w_max || self.w_max > crate::timeseries::MAX_WINDOW_DAYS {
            return Err(contract(format!("invalid width range [{}, {}]", self.w_min, self.w_max)));
        }
        Ok(())
    }

    pub fn widths(&self) -> core::ops::RangeInclusive<u32> {
        self.w_min..=self.w_max
    }
}

/// A series viewed as one season.
#[derive(Debug, Clone, Copy)]
pub struct SeasonRef<'a> {
    pub series: &'a DailySeries,
    pub year_label: i32,
}

/// Focal days: `days` calendar positions from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRange {
    pub start: MonthDay,
    pub days: u32,
}

impl Default for AnchorRange {
    /// 15 December to 21 January.
    fn default() -> Self {
        AnchorRange { start: MonthDay { month: 12, day: 15 }, days: 38 }
    }
}

impl AnchorRange {
    pub fn dates(&self, year_label: i32) -> impl Iterator<Item = NaiveDate> {
        positions(self.start.in_season(year_label), self.days)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    EmptyFocal,
    EmptyBaseline,
    EmptyBoth,
    TooFewObservations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedWidth {
    pub date: NaiveDate,
    pub width: u32,
    pub reason: SkipReason,
}

/// Everything computed for one focal day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayScan {
    pub date: NaiveDate,
    /// One entry per width from `w_min`; `None` where skipped.
    pub p_values: Vec<Option<f64>>,
    pub skipped: Vec<SkippedWidth>,
    /// Zero-filled positions across both windows and all widths.
    pub padded_days: u32,
    pub mean_p: Option<f64>,
}

/// Sum by recursive halving; the grouping depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| pairwise_sum(xs) / xs.len() as f64)
}

/// Tests every width for one focal day.
pub fn scan_day(focal: SeasonRef<'_>, baseline: SeasonRef<'_>, date: NaiveDate, cfg: &ScanConfig) -> Result<DayScan> {
    let md = MonthDay::of(date);
    let end_b = md.in_season(baseline.year_label);
    let mut p_values = Vec::new();
    let mut skipped = Vec::new();
    let mut padded = 0;
    for w in cfg.widths() {
        let fs = slice_positions(focal.series, positions_back(date, w - 1), w);
        let bs = slice_positions(baseline.series, positions_back(end_b, w - 1), w);
        padded += fs.padded_days + bs.padded_days;
        match run_test(cfg.method, &fs.counts, &bs.counts, &cfg.test) {
            Ok(r) => p_values.push(Some(r.p_value)),
            Err(e @ (Error::EmptyWindowSample | Error::SampleTooSmall(_))) => {
                let fe = fs.counts.iter().all(|&c| c == 0);
                let be = bs.counts.iter().all(|&c| c == 0);
                let reason = match (e, fe, be) {
                    (Error::SampleTooSmall(_), _, _) => SkipReason::TooFewObservations,
                    (_, true, true) => SkipReason::EmptyBoth,
                    (_, true, false) => SkipReason::EmptyFocal,
                    _ => SkipReason::EmptyBaseline,
                };
                skipped.push(SkippedWidth { date, width: w, reason });
                p_values.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let tested: Vec<f64> = p_values.iter().flatten().copied().collect();
    Ok(DayScan { date, mean_p: mean(&tested), p_values, skipped, padded_days: padded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueCurve {
    pub dates: Vec<NaiveDate>,
    /// `None` marks a day where no width could be tested.
    pub p_values: Vec<Option<f64>>,
    pub widths_used: (u32, u32),
    pub method: Method,
}

impl PValueCurve {
    pub fn from_days(days: &[DayScan], cfg: &ScanConfig) -> Self {
        PValueCurve {
            dates: days.iter().map(|d| d.date).collect(),
            p_values: days.iter().map(|d| d.mean_p).collect(),
            widths_used: (cfg.w_min, cfg.w_max),
            method: cfg.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub curve: PValueCurve,
    pub days: Vec<DayScan>,
}

impl ScanOutput {
    pub fn skipped(&self) -> impl Iterator<Item = &SkippedWidth> {
        self.days.iter().flat_map(|d| &d.skipped)
    }
}

/// Averaged p-value per focal day, focal days taken from `anchor` in the
/// focal season.
pub fn window_scan(
    focal: SeasonRef<'_>,
    baseline: SeasonRef<'_>,
    anchor: &AnchorRange,
    cfg: &ScanConfig,
) -> Result<ScanOutput> {
    cfg.validate()?;
    let days = anchor.dates(focal.year_label).map(|d| scan_day(focal, baseline, d, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(ScanOutput { curve: PValueCurve::from_days(&days, cfg), days })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiScan {
    pub curve: PValueCurve,
    pub per_baseline: Vec<(i32, ScanOutput)>,
}

/// Per-day mean of already computed baseline curves; a gap in any baseline
/// is a gap in the result.
pub fn average_curves(curves: &[&PValueCurve]) -> Result<PValueCurve> {
    let first = curves.first().ok_or_else(|| contract("no curves to average"))?;
    if curves.iter().any(|c| c.dates != first.dates) {
        return Err(Error::MismatchedSeries("curves cover different days".into()));
    }
    let p_values = (0..first.dates.len())
        .map(|i| {
            let ps: Option<Vec<f64>> = curves.iter().map(|c| c.p_values[i]).collect();
            ps.and_then(|ps| mean(&ps))
        })
        .collect();
    Ok(PValueCurve { dates: first.dates.clone(), p_values, widths_used: first.widths_used, method: first.method })
}

/// Scans `focal` against each baseline and averages the per-day p-values.
///
/// Every label in `required` must be among the baselines and its series
/// must cover at least one day of that season's anchor range.
pub fn multi_baseline_scan(
    focal: SeasonRef<'_>,
    baselines: &[SeasonRef<'_>],
    required: &[i32],
    anchor: &AnchorRange,
    cfg: &ScanConfig,
) -> Result<MultiScan> {
    let present: BTreeSet<i32> = baselines
        .iter()
        .filter(|b| anchor.dates(b.year_label).any(|d| b.series.covers(d)))
        .map(|b| b.year_label)
        .collect();
    let missing: Vec<i32> = required.iter().copied().filter(|y| !present.contains(y)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingBaselines(missing));
    }
    if baselines.is_empty() {
        return Err(contract("at least one baseline season is needed"));
    }
    let per_baseline = baselines
        .iter()
        .map(|b| Ok((b.year_label, window_scan(focal, *b, anchor, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<&PValueCurve> = per_baseline.iter().map(|(_, s)| &s.curve).collect();
    Ok(MultiScan { curve: average_curves(&curves)?, per_baseline })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySegment {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub min_p: f64,
    pub alpha: f64,
}

/// Maximal runs of consecutive days with p < alpha, in date order.
pub fn extract_anomaly_periods(curve: &PValueCurve, alpha: f64) -> Result<Vec<AnomalySegment>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(contract(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut out: Vec<AnomalySegment> = Vec::new();
    let mut open = false;
    for (i, (&date, p)) in curve.dates.iter().zip(&curve.p_values).enumerate() {
        let consecutive = i > 0 && crate::timeseries::next_position(curve.dates[i - 1]) == date;
        match p {
            Some(p) if *p < alpha => {
                if open && consecutive {
                    let seg = out.last_mut().expect("open segment");
                    seg.end_date = date;
                    seg.min_p = seg.min_p.min(*p);
                } else {
                    out.push(AnomalySegment { start_date: date, end_date: date, min_p: *p, alpha });
                }
                open = true;
            }
            _ => open = false,
        }
    }
    Ok(out)
}
