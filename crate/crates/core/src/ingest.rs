//! Record validation and first-occurrence deduplication.
//!
//! Parsing of the line-delimited archive format happens in the IO crate; this
//! module receives [`RawRecord`]s (one per syntactically valid line) and
//! malformed-line notifications, and turns them into immutable
//! [`MessageRecord`]s and [`UserProfile`]s with exact tallies.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::Language;

/// Inclusive calendar range of the study period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(crate::error::contract("date range ends before it starts"));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

impl Default for DateRange {
    /// 1 December 2014 through 1 March 2020.
    fn default() -> Self {
        DateRange {
            start: NaiveDate::from_ymd_opt(2014, 12, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageRecord {
    pub message_id: String,
    pub author_id: String,
    /// UTC, second resolution.
    pub posted_at: NaiveDateTime,
    pub text: String,
    pub language: Language,
    pub keyword_set: String,
}

impl MessageRecord {
    pub fn day(&self) -> NaiveDate {
        self.posted_at.date()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub author_id: String,
    pub followers: u64,
    pub friends: u64,
    pub statuses: u64,
    pub location_text: String,
    /// `(lat, lon)` in degrees when the archive carries coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<(f64, f64)>,
}

/// One syntactically parsed archive line, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: Option<String>,
    pub user_id: Option<String>,
    pub created_at: Option<String>,
    pub text: Option<String>,
    pub lang: Option<String>,
    pub keyword_set: Option<String>,
    pub followers_count: Option<u64>,
    pub friends_count: Option<u64>,
    pub statuses_count: Option<u64>,
    pub location: Option<String>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// The line was not a parseable record at all.
    Syntax,
    MissingField,
    BadTimestamp,
    BadLanguage,
    OutOfRange,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Syntax => "syntax",
            Rejection::MissingField => "missing_field",
            Rejection::BadTimestamp => "bad_timestamp",
            Rejection::BadLanguage => "bad_language",
            Rejection::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub syntax: u64,
    pub missing_field: u64,
    pub bad_timestamp: u64,
    pub bad_language: u64,
    pub out_of_range: u64,
}

impl RejectionTally {
    fn bump(&mut self, r: Rejection) {
        match r {
            Rejection::Syntax => self.syntax += 1,
            Rejection::MissingField => self.missing_field += 1,
            Rejection::BadTimestamp => self.bad_timestamp += 1,
            Rejection::BadLanguage => self.bad_language += 1,
            Rejection::OutOfRange => self.out_of_range += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveStats {
    pub total_records: u64,
    pub unique_messages: u64,
    pub unique_users: u64,
    pub duplicates: u64,
    pub rejected_malformed: u64,
    pub rejections: RejectionTally,
}

/// Accepts ISO-8601 with an offset (`2019-12-20T10:00:00Z`,
/// `2019-12-20T11:00:00+01:00`) or without one, in which case UTC is assumed.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).naive_utc().with_nanosecond_zeroed());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.with_nanosecond_zeroed());
        }
    }
    None
}

trait SecondResolution {
    fn with_nanosecond_zeroed(self) -> Self;
}

impl SecondResolution for NaiveDateTime {
    fn with_nanosecond_zeroed(self) -> Self {
        use chrono::Timelike;
        self.with_nanosecond(0).unwrap_or(self)
    }
}

/// A record that passed validation, with the poster metadata it carried.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidRecord {
    pub message: MessageRecord,
    pub user: UserProfile,
}

pub fn validate_record(raw: &RawRecord, range: &DateRange) -> core::result::Result<ValidRecord, Rejection> {
    let nonempty = |f: &Option<String>| f.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(String::from);
    let id = nonempty(&raw.id).ok_or(Rejection::MissingField)?;
    let author = nonempty(&raw.user_id).ok_or(Rejection::MissingField)?;
    let created = raw.created_at.as_deref().ok_or(Rejection::MissingField)?;
    let text = raw.text.clone().ok_or(Rejection::MissingField)?;
    let lang = raw.lang.as_deref().ok_or(Rejection::MissingField)?;
    let keyword_set = nonempty(&raw.keyword_set).ok_or(Rejection::MissingField)?;

    let posted_at = parse_timestamp(created).ok_or(Rejection::BadTimestamp)?;
    let language = Language::from_code(lang.trim()).ok_or(Rejection::BadLanguage)?;
    if !range.contains(posted_at.date()) {
        return Err(Rejection::OutOfRange);
    }
    let coordinates = match (raw.lat, raw.lon) {
        (Some(lat), Some(lon)) if lat.is_finite() && lon.is_finite() => Some((lat, lon)),
        _ => None,
    };
    Ok(ValidRecord {
        user: UserProfile {
            author_id: author.clone(),
            followers: raw.followers_count.unwrap_or(0),
            friends: raw.friends_count.unwrap_or(0),
            statuses: raw.statuses_count.unwrap_or(0),
            location_text: raw.location.clone().unwrap_or_default(),
            coordinates,
        },
        message: MessageRecord { message_id: id, author_id: author, posted_at, text, language, keyword_set },
    })
}

#[derive(Debug, Clone, Default)]
pub struct Archive {
    pub messages: Vec<MessageRecord>,
    pub users: Vec<UserProfile>,
    pub stats: ArchiveStats,
}

/// Single merge point for deduplication. Feed records in archive order; the
/// first occurrence of a message or user id wins.
#[derive(Debug)]
pub struct ArchiveBuilder {
    range: DateRange,
    seen_messages: BTreeSet<String>,
    seen_users: BTreeSet<String>,
    archive: Archive,
}

impl ArchiveBuilder {
    pub fn new(range: DateRange) -> Self {
        ArchiveBuilder {
            range,
            seen_messages: BTreeSet::new(),
            seen_users: BTreeSet::new(),
            archive: Archive::default(),
        }
    }

    pub fn push(&mut self, raw: &RawRecord) {
        let valid = validate_record(raw, &self.range);
        self.push_validated(valid);
    }

    /// Entry point for callers that validated in parallel.
    pub fn push_validated(&mut self, valid: core::result::Result<ValidRecord, Rejection>) {
        let stats = &mut self.archive.stats;
        stats.total_records += 1;
        match valid {
            Err(reason) => {
                stats.rejected_malformed += 1;
                stats.rejections.bump(reason);
            }
            Ok(ValidRecord { message, user }) => {
                if self.seen_users.insert(user.author_id.clone()) {
                    stats.unique_users += 1;
                    self.archive.users.push(user);
                }
                if self.seen_messages.insert(message.message_id.clone()) {
                    stats.unique_messages += 1;
                    self.archive.messages.push(message);
                } else {
                    stats.duplicates += 1;
                }
            }
        }
    }

    pub fn push_malformed(&mut self) {
        self.push_validated(Err(Rejection::Syntax));
    }

    /// Fails when the malformed fraction exceeds `corrupt_threshold`.
    pub fn finish(self, corrupt_threshold: f64) -> Result<Archive> {
        let s = &self.archive.stats;
        if s.total_records > 0 && (s.rejected_malformed as f64) > corrupt_threshold * s.total_records as f64 {
            return Err(Error::CorruptArchive {
                malformed: s.rejected_malformed,
                total: s.total_records,
                threshold: corrupt_threshold,
            });
        }
        Ok(self.archive)
    }
}

pub const DEFAULT_CORRUPT_THRESHOLD: f64 = 0.5;
