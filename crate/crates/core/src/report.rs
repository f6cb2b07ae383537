//! Region user tables and the split of anomaly segments at the news cutoff.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geo::RegionId;
use crate::lang::Country;
use crate::stats::{relative_variation, AnomalySegment, RelativeVariation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReportRow {
    pub region: RegionId,
    pub users_now: u64,
    pub users_prior: u64,
    pub relative_variation: RelativeVariation,
    /// users_now − users_prior.
    pub absolute_variation: i64,
}

impl RegionReportRow {
    pub fn new(region: RegionId, users_now: u64, users_prior: u64) -> Result<Self> {
        Ok(RegionReportRow {
            region,
            users_now,
            users_prior,
            relative_variation: relative_variation(users_now as i64, users_prior as i64)?,
            absolute_variation: users_now as i64 - users_prior as i64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalsRow {
    pub users_now: u64,
    pub users_prior: u64,
    pub relative_variation: RelativeVariation,
    pub absolute_variation: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryTable {
    pub country: Country,
    /// Descending relative variation, then region code.
    pub rows: Vec<RegionReportRow>,
    /// From summed counts, never from averaged rows.
    pub total: TotalsRow,
}

/// Groups rows by country in [`Country::ALL`] order, sorts each group and
/// appends totals. Countries without rows are omitted.
pub fn region_tables(rows: Vec<RegionReportRow>) -> Result<Vec<CountryTable>> {
    let mut groups: BTreeMap<Country, Vec<RegionReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.region.country).or_default().push(r);
    }
    let mut out = Vec::new();
    for country in Country::ALL {
        let Some(mut rows) = groups.remove(&country) else { continue };
        rows.sort_by(|a, b| {
            b.relative_variation
                .rank()
                .total_cmp(&a.relative_variation.rank())
                .then_with(|| a.region.code.cmp(&b.region.code))
        });
        let now: u64 = rows.iter().map(|r| r.users_now).sum();
        let prior: u64 = rows.iter().map(|r| r.users_prior).sum();
        let total = TotalsRow {
            users_now: now,
            users_prior: prior,
            relative_variation: relative_variation(now as i64, prior as i64)?,
            absolute_variation: now as i64 - prior as i64,
        };
        out.push(CountryTable { country, rows, total });
    }
    Ok(out)
}

/// Splits segments at `cutoff`: days up to and including it are early
/// warnings, later days belong to the news era. A straddling segment is cut
/// in two; the parts keep the segment's minimum p.
pub fn split_at_cutoff(segments: &[AnomalySegment], cutoff: NaiveDate) -> (Vec<AnomalySegment>, Vec<AnomalySegment>) {
    let mut early = Vec::new();
    let mut news = Vec::new();
    for s in segments {
        if s.end_date <= cutoff {
            early.push(s.clone());
        } else if s.start_date > cutoff {
            news.push(s.clone());
        } else {
            early.push(AnomalySegment { end_date: cutoff, ..s.clone() });
            let next = cutoff.succ_opt().expect("date in range");
            news.push(AnomalySegment { start_date: next, ..s.clone() });
        }
    }
    (early, news)
}
