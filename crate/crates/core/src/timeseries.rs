//! Daily count series and season-aligned slices.
//!
//! Seasons are labelled by the year holding their January part: the
//! `2020` season runs from 1 July 2019 to 30 June 2020. Slices walk calendar
//! days skipping 29 February, whose count is merged into 28 February, so
//! every year yields vectors of equal length for the same month-day span.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::geo::Resolution;
use crate::ingest::{DateRange, MessageRecord};
use crate::lang::Country;

pub const MAX_WINDOW_DAYS: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    Messages,
    UniqueUsers,
}

impl CountMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CountMode::Messages => "messages",
            CountMode::UniqueUsers => "unique_users",
        }
    }
}

impl FromStr for CountMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "messages" => Ok(CountMode::Messages),
            "unique_users" => Ok(CountMode::UniqueUsers),
            _ => Err(contract(format!("unknown count mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    Country(Country),
    Region(String),
    AllCountries,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Country(c) => write!(f, "country-{}", c.code()),
            Scope::Region(r) => write!(f, "region-{r}"),
            Scope::AllCountries => f.write_str("all-countries"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "all-countries" {
            return Ok(Scope::AllCountries);
        }
        if let Some(c) = s.strip_prefix("country-") {
            return Country::from_code(c).map(Scope::Country).ok_or_else(|| contract(format!("unknown country {c}")));
        }
        if let Some(r) = s.strip_prefix("region-") {
            if !r.is_empty() {
                return Ok(Scope::Region(r.to_string()));
            }
        }
        Err(contract(format!("unknown scope {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub scope: Scope,
    pub keyword_set: String,
    pub mode: CountMode,
}

/// One count per consecutive calendar day; absent days are explicit zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailySeries {
    pub key: SeriesKey,
    pub start: NaiveDate,
    pub values: Vec<u64>,
}

impl DailySeries {
    pub fn zeros(key: SeriesKey, range: &DateRange) -> Self {
        DailySeries { key, start: range.start, values: vec![0; range.days()] }
    }

    /// Last covered day. Meaningless for an empty series.
    pub fn end(&self) -> NaiveDate {
        self.start + Days::new(self.values.len().saturating_sub(1) as u64)
    }

    pub fn get(&self, day: NaiveDate) -> Option<u64> {
        let offset = (day - self.start).num_days();
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    pub fn covers(&self, day: NaiveDate) -> bool {
        self.get(day).is_some()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take(self.values.len())
    }

    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// Calendar

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    /// 29 February is not a valid anchor; it has no position of its own.
    pub fn new(month: u32, day: u32) -> Result<Self> {
        if NaiveDate::from_ymd_opt(2019, month, day).is_none() {
            return Err(contract(format!("invalid month-day {month:02}-{day:02}")));
        }
        Ok(MonthDay { month, day })
    }

    pub fn of(date: NaiveDate) -> Self {
        MonthDay { month: date.month(), day: date.day() }
    }

    /// The date of this month-day inside the season labelled `year_label`.
    pub fn in_season(self, year_label: i32) -> NaiveDate {
        let year = if self.month >= 7 { year_label - 1 } else { year_label };
        NaiveDate::from_ymd_opt(year, self.month, self.day).expect("validated month-day")
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (m, d) = s.split_once('-').ok_or_else(|| contract(format!("expected MM-DD, got {s:?}")))?;
        let parse = |x: &str| x.trim().parse::<u32>().map_err(|_| contract(format!("expected MM-DD, got {s:?}")));
        MonthDay::new(parse(m)?, parse(d)?)
    }
}

/// Season label of a date: its year, or the next year from July on.
pub fn season_label(date: NaiveDate) -> i32 {
    if date.month() >= 7 {
        date.year() + 1
    } else {
        date.year()
    }
}

fn is_feb29(d: NaiveDate) -> bool {
    d.month() == 2 && d.day() == 29
}

/// Next calendar position, skipping 29 February.
pub fn next_position(d: NaiveDate) -> NaiveDate {
    let n = d.succ_opt().expect("date in range");
    if is_feb29(n) {
        n.succ_opt().expect("date in range")
    } else {
        n
    }
}

/// `k` positions back, skipping 29 February.
pub fn positions_back(mut d: NaiveDate, k: u32) -> NaiveDate {
    for _ in 0..k {
        d = d.pred_opt().expect("date in range");
        if is_feb29(d) {
            d = d.pred_opt().expect("date in range");
        }
    }
    d
}

/// `width` calendar positions starting at `start`.
pub fn positions(start: NaiveDate, width: u32) -> impl Iterator<Item = NaiveDate> {
    let mut d = if is_feb29(start) { start.pred_opt().expect("date in range") } else { start };
    (0..width).map(move |i| {
        if i > 0 {
            d = next_position(d);
        }
        d
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonWindow {
    pub anchor_start: MonthDay,
    pub width_days: u32,
    pub year_label: i32,
}

impl SeasonWindow {
    pub fn new(anchor_start: MonthDay, width_days: u32, year_label: i32) -> Result<Self> {
        if !(1..=MAX_WINDOW_DAYS).contains(&width_days) {
            return Err(contract(format!("window width {width_days} outside [1, {MAX_WINDOW_DAYS}]")));
        }
        Ok(SeasonWindow { anchor_start, width_days, year_label })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.anchor_start.in_season(self.year_label)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        positions(self.start_date(), self.width_days)
    }

    /// Same month-day span in another season.
    pub fn in_season(&self, year_label: i32) -> SeasonWindow {
        SeasonWindow { year_label, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeasonSlice {
    pub counts: Vec<u64>,
    /// Positions that fell outside the series and were zero-filled.
    pub padded_days: u32,
}

/// Counts over `width` positions from `start`, 29 February merged into
/// 28 February and days outside the series zero-filled.
pub fn slice_positions(series: &DailySeries, start: NaiveDate, width: u32) -> SeasonSlice {
    let mut padded = 0;
    let counts = positions(start, width)
        .map(|d| {
            let mut c = match series.get(d) {
                Some(c) => c,
                None => {
                    padded += 1;
                    0
                }
            };
            if d.month() == 2 && d.day() == 28 {
                if let Some(leap) = NaiveDate::from_ymd_opt(d.year(), 2, 29) {
                    c += series.get(leap).unwrap_or(0);
                }
            }
            c
        })
        .collect();
    SeasonSlice { counts, padded_days: padded }
}

pub fn season_slice(series: &DailySeries, window: &SeasonWindow) -> Result<SeasonSlice> {
    if !(1..=MAX_WINDOW_DAYS).contains(&window.width_days) {
        return Err(contract(format!("window width {} outside [1, {MAX_WINDOW_DAYS}]", window.width_days)));
    }
    Ok(slice_positions(series, window.start_date(), window.width_days))
}

/// Running share of the slice total; ends at exactly 1.
pub fn cumulative_rescaled(slice: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = slice.iter().sum();
    if total == 0 {
        return Err(Error::EmptySeason);
    }
    let mut acc = 0u64;
    Ok(slice
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Aggregation

/// Whether a message counts towards `scope`. Posters that resolved to a
/// region count there and in its country; unplaced posters that were not
/// vetoed count in the home country of their message language.
pub fn in_scope(scope: &Scope, msg: &MessageRecord, resolutions: &BTreeMap<String, Resolution>) -> bool {
    let res = resolutions.get(&msg.author_id);
    if res.is_some_and(Resolution::is_vetoed) {
        return false;
    }
    let region = res.and_then(Resolution::region);
    match scope {
        Scope::AllCountries => true,
        Scope::Region(code) => region.is_some_and(|r| &r.code == code),
        Scope::Country(c) => match region {
            Some(r) => r.country == *c,
            None => msg.language.home_country() == *c,
        },
    }
}

pub fn aggregate_daily(
    messages: &[MessageRecord],
    resolutions: &BTreeMap<String, Resolution>,
    key: &SeriesKey,
    range: &DateRange,
) -> DailySeries {
    let mut series = DailySeries::zeros(key.clone(), range);
    let mut seen: BTreeSet<(NaiveDate, &str)> = BTreeSet::new();
    for m in messages {
        let day = m.day();
        if m.keyword_set != key.keyword_set || !range.contains(day) || !in_scope(&key.scope, m, resolutions) {
            continue;
        }
        if key.mode == CountMode::UniqueUsers && !seen.insert((day, m.author_id.as_str())) {
            continue;
        }
        series.values[(day - range.start).num_days() as usize] += 1;
    }
    series
}

/// Distinct posters in `scope` with at least one message in `window`.
pub fn window_unique_users(
    messages: &[MessageRecord],
    resolutions: &BTreeMap<String, Resolution>,
    scope: &Scope,
    keyword_set: &str,
    window: &DateRange,
) -> u64 {
    messages
        .iter()
        .filter(|m| m.keyword_set == keyword_set && window.contains(m.day()) && in_scope(scope, m, resolutions))
        .map(|m| m.author_id.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u64
}

/// Pointwise sum of series over identical dates and count mode; the result
/// is scoped to all countries.
pub fn merge_across_languages(series: &[DailySeries]) -> Result<DailySeries> {
    let first = series.first().ok_or_else(|| contract("nothing to merge"))?;
    for s in &series[1..] {
        if s.start != first.start || s.values.len() != first.values.len() {
            return Err(Error::MismatchedSeries("date ranges differ".into()));
        }
        if s.key.mode != first.key.mode || s.key.keyword_set != first.key.keyword_set {
            return Err(Error::MismatchedSeries("keyword set or count mode differ".into()));
        }
    }
    let mut values = vec![0u64; first.values.len()];
    for s in series {
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    Ok(DailySeries { key: SeriesKey { scope: Scope::AllCountries, ..first.key.clone() }, start: first.start, values })
}
