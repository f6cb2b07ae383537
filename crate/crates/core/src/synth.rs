//! Deterministic synthetic archives with a known ground truth.
//!
//! Randomness comes from ChaCha20 keyed with the little-endian seed in the
//! first 8 key bytes (the rest zero), one stream per day numbered by
//! `NaiveDate::num_days_from_ce`. Within a day, languages are visited in
//! [`Language::ALL`] order and region slots in scenario order; every decision
//! consumes `next_u32` outputs in a fixed sequence.
//!
//! Daily counts are Binomial(t, μ/t) with t = ⌈4μ⌉ trials, each trial a
//! comparison of `next_u32` against ⌊(μ/t)·2³²⌋. Means are built from
//! additions, multiplications and divisions only, so every IEEE-754
//! platform draws the same counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, NaiveTime};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DateRange, RawRecord};
use crate::lang::Language;
use crate::timeseries::season_label;

/// A place posters claim to live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSlot {
    /// Gazetteer code the location should resolve to; `None` for places
    /// outside the study area or unresolvable text.
    pub region: Option<String>,
    pub location: String,
    /// Relative share of the language's traffic.
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surge {
    /// Restricts the surge to one language.
    #[serde(default)]
    pub language: Option<Language>,
    /// Restricts the surge to one slot region code.
    #[serde(default)]
    pub region: Option<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub multiplier: f64,
}

impl Surge {
    fn applies(&self, date: NaiveDate, lang: Language, slot: &RegionSlot) -> bool {
        (self.start..=self.end).contains(&date)
            && self.language.is_none_or(|l| l == lang)
            && self.region.as_ref().is_none_or(|r| slot.region.as_ref() == Some(r))
    }
}

/// Fractions of generated messages given each noise category. URL,
/// over-cap and keyword categories are disjoint; duplicates and malformed
/// lines are extra archive lines on top of the messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisePlan {
    pub url: f64,
    pub over_cap: f64,
    pub keyword: f64,
    pub duplicate: f64,
    pub malformed: f64,
    /// Keyword posts are only planted up to this day; later they are organic.
    pub keyword_until: NaiveDate,
    /// Over-cap posters get at least this many followers; organic posters
    /// get fewer.
    pub follower_cap: u64,
    pub planted_keyword: String,
}

impl Default for NoisePlan {
    fn default() -> Self {
        NoisePlan {
            url: 0.0,
            over_cap: 0.0,
            keyword: 0.0,
            duplicate: 0.0,
            malformed: 0.0,
            keyword_until: NaiveDate::from_ymd_opt(2020, 1, 21).expect("valid date"),
            follower_cap: crate::filters::DEFAULT_FOLLOWER_CAP,
            planted_keyword: "Coronavirus".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    /// Season labels to generate; days of other seasons stay empty.
    pub years: Vec<i32>,
    pub range: DateRange,
    pub keyword_set: String,
    /// Expected messages per day per language before seasonality.
    pub base_rate: BTreeMap<Language, f64>,
    /// Peak relative rise of a triangular winter profile centred on 15 January.
    pub seasonal_amplitude: f64,
    #[serde(default)]
    pub surges: Vec<Surge>,
    #[serde(default)]
    pub noise: NoisePlan,
    pub region_mix: BTreeMap<Language, Vec<RegionSlot>>,
    /// Distinct organic posters per slot, and separately over-cap posters.
    pub authors_per_slot: u32,
}

/// Half-width in days of the seasonal triangle.
const SEASON_HALF_WIDTH: f64 = 60.0;

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        let n = &self.noise;
        for (name, f) in [
            ("url", n.url),
            ("over_cap", n.over_cap),
            ("keyword", n.keyword),
            ("duplicate", n.duplicate),
            ("malformed", n.malformed),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} fraction {f} outside [0, 1]"));
            }
        }
        if n.url + n.over_cap + n.keyword > 1.0 {
            return bad("noise fractions sum above 1".into());
        }
        if n.follower_cap == 0 {
            return bad("follower cap must be positive".into());
        }
        if let Some(s) = self.surges.iter().find(|s| !(s.multiplier >= 1.0) || s.start > s.end) {
            return bad(format!("surge {}..{} needs multiplier ≥ 1 and start ≤ end", s.start, s.end));
        }
        if let Some((l, r)) = self.base_rate.iter().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
            return bad(format!("base rate for {l} must be a nonnegative number, got {r}"));
        }
        if !(self.seasonal_amplitude.is_finite() && self.seasonal_amplitude >= 0.0) {
            return bad("seasonal amplitude must be nonnegative".into());
        }
        if self.authors_per_slot == 0 {
            return bad("authors_per_slot must be positive".into());
        }
        for (l, rate) in &self.base_rate {
            let slots = self.region_mix.get(l).map(Vec::as_slice).unwrap_or(&[]);
            if *rate > 0.0 && slots.iter().map(|s| s.weight as u64).sum::<u64>() == 0 {
                return bad(format!("language {l} has traffic but no weighted region slots"));
            }
        }
        Ok(())
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        let years: BTreeSet<i32> = self.years.iter().copied().collect();
        self.range.start.iter_days().take(self.range.days()).filter(move |d| years.contains(&season_label(*d)))
    }

    fn seasonal_factor(&self, date: NaiveDate) -> f64 {
        let peak = NaiveDate::from_ymd_opt(season_label(date), 1, 15).expect("valid date");
        let dist = (date - peak).num_days().unsigned_abs() as f64;
        let tri = if dist >= SEASON_HALF_WIDTH { 0.0 } else { 1.0 - dist / SEASON_HALF_WIDTH };
        1.0 + self.seasonal_amplitude * tri
    }

    /// Expected messages for one language and slot on one day.
    pub fn mean(&self, date: NaiveDate, lang: Language, slot_index: usize) -> f64 {
        let Some(rate) = self.base_rate.get(&lang) else { return 0.0 };
        let slots = &self.region_mix[&lang];
        let total: u64 = slots.iter().map(|s| s.weight as u64).sum();
        let slot = &slots[slot_index];
        let mut mu = rate * slot.weight as f64 / total as f64 * self.seasonal_factor(date);
        for s in self.surges.iter().filter(|s| s.applies(date, lang, slot)) {
            mu *= s.multiplier;
        }
        mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Organic,
    Url,
    OverCap,
    Keyword,
}

/// One archive line.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthLine {
    Record(RawRecord),
    Malformed(String),
}

/// Exact counts for one (day, language, slot) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTruth {
    pub date: NaiveDate,
    pub language: Language,
    pub slot: usize,
    pub region: Option<String>,
    pub organic: u64,
    pub url: u64,
    pub over_cap: u64,
    pub keyword: u64,
}

impl CellTruth {
    pub fn messages(&self) -> u64 {
        self.organic + self.url + self.over_cap + self.keyword
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub lines: u64,
    pub records: u64,
    pub messages: u64,
    pub duplicates: u64,
    pub malformed: u64,
    pub organic: u64,
    pub url: u64,
    pub over_cap: u64,
    pub keyword: u64,
    pub unique_users: u64,
}

/// Everything needed to check downstream stages exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub keyword_set: String,
    pub surges: Vec<Surge>,
    pub totals: Totals,
    /// Nonempty cells only, by date then language then slot.
    pub cells: Vec<CellTruth>,
}

impl GroundTruth {
    /// Messages per day over `range` for cells matching `filter`.
    pub fn daily(&self, range: &DateRange, mut filter: impl FnMut(&CellTruth) -> u64) -> Vec<u64> {
        let mut v = alloc::vec![0u64; range.days()];
        for c in self.cells.iter().filter(|c| range.contains(c.date)) {
            v[(c.date - range.start).num_days() as usize] += filter(c);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayOutput {
    pub date: NaiveDate,
    pub lines: Vec<SynthLine>,
    pub cells: Vec<CellTruth>,
}

fn day_rng(seed: u64, date: NaiveDate) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(date.num_days_from_ce() as u64);
    rng
}

/// ⌊f·2³²⌋ for f in [0, 1], saturating at 2³².
fn threshold(f: f64) -> u64 {
    let t = f * 4_294_967_296.0;
    if t >= 4_294_967_296.0 {
        1 << 32
    } else {
        t as u64
    }
}

fn bernoulli(rng: &mut ChaCha20Rng, thr: u64) -> bool {
    (rng.next_u32() as u64) < thr
}

/// Binomial(⌈4μ⌉, μ/⌈4μ⌉) by counting successful trials.
pub fn sample_count(rng: &mut ChaCha20Rng, mu: f64) -> u64 {
    if !(mu > 0.0) {
        return 0;
    }
    let trials = {
        let t = mu * 4.0;
        let f = t as u64;
        if (f as f64) < t {
            f + 1
        } else {
            f
        }
    };
    let thr = threshold(mu / trials as f64);
    (0..trials).filter(|_| bernoulli(rng, thr)).count() as u64
}

fn organic_phrase(keyword_set: &str, lang: Language) -> &'static str {
    match (keyword_set, lang) {
        ("dry_cough", Language::En) => "dry cough",
        ("dry_cough", Language::De) => "trockener Husten",
        ("dry_cough", Language::Fr) => "toux sèche",
        ("dry_cough", Language::It) => "tosse secca",
        ("dry_cough", Language::Es) => "tos seca",
        ("dry_cough", Language::Pl) => "suchy kaszel",
        ("dry_cough", Language::Nl) => "droge hoest",
        (_, Language::En) => "pneumonia",
        (_, Language::De) => "Lungenentzündung",
        (_, Language::Fr) => "pneumonie",
        (_, Language::It) => "polmonite",
        (_, Language::Es) => "neumonía",
        (_, Language::Pl) => "zapalenie płuc",
        (_, Language::Nl) => "longontsteking",
    }
}

const FILLERS: [&str; 6] = [
    "feeling awful today",
    "third day in bed",
    "the doctor says rest",
    "half the office is off sick",
    "not again this winter",
    "anyone else?",
];

/// Follower count of organic poster `k`; poster 0 sits just under the cap.
fn organic_followers(cap: u64, k: u64) -> u64 {
    cap - 1 - (k * 37) % cap
}

/// Generates one day. `spec` must have passed [`ScenarioSpec::validate`].
pub fn generate_day(spec: &ScenarioSpec, date: NaiveDate) -> DayOutput {
    let mut rng = day_rng(spec.seed, date);
    let n = &spec.noise;
    let keyword_on = date <= n.keyword_until;
    let t_url = threshold(n.url);
    let t_cap = threshold(n.url + n.over_cap);
    let t_kw = threshold(n.url + n.over_cap + if keyword_on { n.keyword } else { 0.0 });
    let t_dup = threshold(n.duplicate);
    let t_bad = threshold(n.malformed);
    let mut lines = Vec::new();
    let mut cells = Vec::new();
    let mut seq = 0u64;
    for lang in Language::ALL {
        let Some(slots) = spec.region_mix.get(&lang) else { continue };
        if !spec.base_rate.contains_key(&lang) {
            continue;
        }
        for (si, slot) in slots.iter().enumerate() {
            let count = sample_count(&mut rng, spec.mean(date, lang, si));
            if count == 0 {
                continue;
            }
            let mut cell = CellTruth {
                date,
                language: lang,
                slot: si,
                region: slot.region.clone(),
                organic: 0,
                url: 0,
                over_cap: 0,
                keyword: 0,
            };
            for _ in 0..count {
                let u = rng.next_u32() as u64;
                let category = if u < t_url {
                    Category::Url
                } else if u < t_cap {
                    Category::OverCap
                } else if u < t_kw {
                    Category::Keyword
                } else {
                    Category::Organic
                };
                let k = (rng.next_u32() % spec.authors_per_slot) as u64;
                let secs = rng.next_u32() % 86_400;
                let filler = FILLERS[(rng.next_u32() % FILLERS.len() as u32) as usize];
                let id = format!("{}-{}-{}-{}", date.format("%Y%m%d"), lang.code(), si, seq);
                seq += 1;
                let phrase = organic_phrase(&spec.keyword_set, lang);
                let (author, followers, text) = match category {
                    Category::Organic => {
                        cell.organic += 1;
                        (
                            format!("u-{}-{si}-{k}", lang.code()),
                            organic_followers(n.follower_cap, k),
                            format!("{phrase}, {filler}"),
                        )
                    }
                    Category::Url => {
                        cell.url += 1;
                        let text = format!("{phrase}: https://news.example/{id}");
                        (format!("u-{}-{si}-{k}", lang.code()), organic_followers(n.follower_cap, k), text)
                    }
                    Category::OverCap => {
                        cell.over_cap += 1;
                        (format!("x-{}-{si}-{k}", lang.code()), n.follower_cap + k * 101, format!("{phrase}, {filler}"))
                    }
                    Category::Keyword => {
                        cell.keyword += 1;
                        let text = format!("{phrase} {} {filler}", n.planted_keyword);
                        (format!("u-{}-{si}-{k}", lang.code()), organic_followers(n.follower_cap, k), text)
                    }
                };
                let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("seconds in a day");
                let record = RawRecord {
                    id: Some(id.clone()),
                    user_id: Some(author),
                    created_at: Some(format!("{}Z", date.and_time(time).format("%Y-%m-%dT%H:%M:%S"))),
                    text: Some(text),
                    lang: Some(lang.code().to_string()),
                    keyword_set: Some(spec.keyword_set.clone()),
                    followers_count: Some(followers),
                    friends_count: Some(k * 13 % 500),
                    statuses_count: Some(100 + k * 29 % 9000),
                    location: Some(slot.location.clone()),
                    lat: None,
                    lon: None,
                };
                let dup = bernoulli(&mut rng, t_dup);
                let bad = bernoulli(&mut rng, t_bad);
                if dup {
                    lines.push(SynthLine::Record(record.clone()));
                }
                lines.push(SynthLine::Record(record));
                if bad {
                    lines.push(SynthLine::Malformed(format!("{{\"id\": \"{id}-broken\", \"text\": ")));
                }
            }
            cells.push(cell);
        }
    }
    DayOutput { date, lines, cells }
}

/// Assembles per-day outputs (in date order) into one archive and manifest.
pub fn assemble(spec: &ScenarioSpec, days: Vec<DayOutput>) -> (Vec<SynthLine>, GroundTruth) {
    let mut totals = Totals::default();
    let mut users = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut lines = Vec::new();
    let mut cells = Vec::new();
    for day in days {
        for line in day.lines {
            totals.lines += 1;
            match &line {
                SynthLine::Malformed(_) => totals.malformed += 1,
                SynthLine::Record(r) => {
                    totals.records += 1;
                    let id = r.id.clone().unwrap_or_default();
                    if seen.insert(id) {
                        totals.messages += 1;
                    } else {
                        totals.duplicates += 1;
                    }
                    users.insert(r.user_id.clone().unwrap_or_default());
                }
            }
            lines.push(line);
        }
        for c in day.cells {
            totals.organic += c.organic;
            totals.url += c.url;
            totals.over_cap += c.over_cap;
            totals.keyword += c.keyword;
            cells.push(c);
        }
    }
    totals.unique_users = users.len() as u64;
    let truth = GroundTruth {
        seed: spec.seed,
        keyword_set: spec.keyword_set.clone(),
        surges: spec.surges.clone(),
        totals,
        cells,
    };
    (lines, truth)
}

pub fn generate_corpus(spec: &ScenarioSpec) -> Result<(Vec<SynthLine>, GroundTruth)> {
    spec.validate()?;
    let days = spec.days().map(|d| generate_day(spec, d)).collect();
    Ok(assemble(spec, days))
}
