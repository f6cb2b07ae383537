//! Pipeline configuration, read from TOML.
//!
//! Relative paths are taken from the directory holding the config file and
//! must exist when the file is loaded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use earlywarn_core::filters::{default_exclusions, FilterPolicy, Rule, DEFAULT_FOLLOWER_CAP};
use earlywarn_core::ingest::{DateRange, DEFAULT_CORRUPT_THRESHOLD};
use earlywarn_core::stats::{
    AdInterpolation, AnchorRange, Method, SampleMode, ScanConfig, TestConfig, DEFAULT_EXACT_MAX_PRODUCT,
};
use earlywarn_core::timeseries::{positions, CountMode, MonthDay};
use earlywarn_core::Language;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::archive::KeywordSets;
use crate::error::{Error, Result};

fn month_day<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<MonthDay, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn month_day_ser<S: Serializer>(md: &MonthDay, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(md)
}

fn opt_month_day<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<MonthDay>, D::Error> {
    Option::<String>::deserialize(d)?.map(|s| s.parse().map_err(serde::de::Error::custom)).transpose()
}

fn opt_month_day_ser<S: Serializer>(md: &Option<MonthDay>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match md {
        Some(md) => s.collect_str(md),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Label of the season under test, e.g. 2020 for winter 2019-2020.
    pub focal_season: i32,
    pub baseline_seasons: Vec<i32>,
    #[serde(default = "default_anchor_start", deserialize_with = "month_day", serialize_with = "month_day_ser")]
    pub anchor_start: MonthDay,
    #[serde(default = "default_anchor_days")]
    pub anchor_days: u32,
    /// Last day whose anomalies may be reported as early warnings.
    #[serde(default = "default_cutoff")]
    pub news_cutoff: NaiveDate,
    /// Scan past the cutoff; such anomalies go to a separate section.
    #[serde(default)]
    pub allow_post_cutoff: bool,
    #[serde(default = "default_count_mode")]
    pub count_mode: CountMode,
}

fn default_anchor_start() -> MonthDay {
    AnchorRange::default().start
}

fn default_anchor_days() -> u32 {
    AnchorRange::default().days
}

fn default_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 21).expect("valid date")
}

fn default_count_mode() -> CountMode {
    CountMode::Messages
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub w_min: u32,
    pub w_max: u32,
    pub method: Method,
    pub alphas: Vec<f64>,
    pub sample_mode: SampleMode,
    pub exact_max_product: u64,
    pub ad_interpolation: AdInterpolation,
}

impl Default for ScanSection {
    fn default() -> Self {
        let t = TestConfig::default();
        ScanSection {
            w_min: 50,
            w_max: 70,
            method: Method::Ks,
            alphas: vec![0.05, 0.10],
            sample_mode: t.sample_mode,
            exact_max_product: DEFAULT_EXACT_MAX_PRODUCT,
            ad_interpolation: t.ad_interpolation,
        }
    }
}

impl ScanSection {
    pub fn scan_config(&self, method: Method) -> ScanConfig {
        ScanConfig {
            w_min: self.w_min,
            w_max: self.w_max,
            method,
            test: TestConfig {
                sample_mode: self.sample_mode,
                exact_max_product: self.exact_max_product,
                ad_interpolation: self.ad_interpolation,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcludeList {
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltersSection {
    pub url: bool,
    pub follower_cap: u64,
    pub keyword: bool,
    pub case_fold: bool,
    /// Keyword exclusion applies from the study start up to this day;
    /// absent means the whole study range.
    pub keyword_window_end: Option<NaiveDate>,
    pub url_drops_author: bool,
    pub rule_order: [Rule; 3],
    pub exclude: BTreeMap<Language, ExcludeList>,
}

impl Default for FiltersSection {
    fn default() -> Self {
        let p = FilterPolicy::default();
        FiltersSection {
            url: p.url_filter,
            follower_cap: DEFAULT_FOLLOWER_CAP,
            keyword: p.keyword_filter,
            case_fold: p.case_fold,
            keyword_window_end: p.keyword_window.map(|w| w.end),
            url_drops_author: p.url_drops_author,
            rule_order: p.rule_order,
            exclude: default_exclusions().into_iter().map(|(l, keywords)| (l, ExcludeList { keywords })).collect(),
        }
    }
}

impl FiltersSection {
    pub fn policy(&self, study_start: NaiveDate) -> FilterPolicy {
        FilterPolicy {
            url_filter: self.url,
            follower_cap: self.follower_cap,
            keyword_filter: self.keyword,
            excluded_keywords: self.exclude.iter().map(|(l, e)| (*l, e.keywords.clone())).collect(),
            case_fold: self.case_fold,
            keyword_window: self.keyword_window_end.map(|end| DateRange { start: study_start.min(end), end }),
            rule_order: self.rule_order,
            url_drops_author: self.url_drops_author,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoSection {
    pub gazetteer: PathBuf,
    #[serde(default)]
    pub boundaries: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveSection {
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_corrupt")]
    pub corrupt_threshold: f64,
}

fn default_corrupt() -> f64 {
    DEFAULT_CORRUPT_THRESHOLD
}

/// Window over which distinct posters per region are counted, in the focal
/// season and the prior one. Defaults to the anchor window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub prior_season: Option<i32>,
    #[serde(deserialize_with = "opt_month_day", serialize_with = "opt_month_day_ser")]
    pub users_window_start: Option<MonthDay>,
    pub users_window_days: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub study: StudySection,
    #[serde(default)]
    pub scan: ScanSection,
    /// Keyword lists per set and language. Every set listed is analysed.
    pub keywords: BTreeMap<String, BTreeMap<Language, Vec<String>>>,
    #[serde(default)]
    pub filters: FiltersSection,
    pub geo: GeoSection,
    pub archive: ArchiveSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Raw file bytes plus applied overrides; hashed into the run manifest.
    #[serde(skip)]
    pub fingerprint: String,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|source| Error::Toml { path: path.into(), source })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        let mut cfg: PipelineConfig = toml::from_str(text)?;
        cfg.fingerprint = text.to_string();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn archive_paths(&self) -> Vec<PathBuf> {
        self.archive.paths.iter().map(|p| self.resolve(p)).collect()
    }

    pub fn gazetteer_path(&self) -> PathBuf {
        self.resolve(&self.geo.gazetteer)
    }

    pub fn boundaries_path(&self) -> Option<PathBuf> {
        self.geo.boundaries.as_deref().map(|p| self.resolve(p))
    }

    pub fn schema_path(&self) -> Option<PathBuf> {
        self.archive.schema.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.study;
        if s.end < s.start {
            return bad(format!("study ends ({}) before it starts ({})", s.end, s.start));
        }
        if s.baseline_seasons.is_empty() {
            return bad("at least one baseline season is required".into());
        }
        if s.baseline_seasons.contains(&s.focal_season) {
            return bad(format!("focal season {} is also listed as a baseline", s.focal_season));
        }
        if s.anchor_days == 0 {
            return bad("anchor_days must be positive".into());
        }
        if self.scan.alphas.is_empty() {
            return bad("at least one alpha is required".into());
        }
        if let Some(a) = self.scan.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        self.scan.scan_config(self.scan.method).validate()?;
        if self.keywords.is_empty() {
            return bad("no keyword sets configured".into());
        }
        if !(self.archive.corrupt_threshold > 0.0 && self.archive.corrupt_threshold <= 1.0) {
            return bad(format!("corrupt_threshold {} outside (0, 1]", self.archive.corrupt_threshold));
        }
        self.filters.policy(s.start).validate()?;
        if self.archive.paths.is_empty() {
            return bad("no archive paths configured".into());
        }
        Ok(())
    }

    /// Every input file named by the config exists.
    pub fn check_inputs(&self) -> Result<()> {
        let mut required: Vec<PathBuf> = self.archive_paths();
        required.push(self.gazetteer_path());
        required.extend(self.boundaries_path());
        required.extend(self.schema_path());
        if let Some(p) = required.iter().find(|p| !p.exists()) {
            return Err(Error::Config(format!("path {} does not exist", p.display())));
        }
        Ok(())
    }

    pub fn study_range(&self) -> DateRange {
        DateRange { start: self.study.start, end: self.study.end }
    }

    pub fn anchor(&self) -> AnchorRange {
        AnchorRange { start: self.study.anchor_start, days: self.study.anchor_days }
    }

    pub fn prior_season(&self) -> i32 {
        self.report.prior_season.unwrap_or(self.study.focal_season - 1)
    }

    /// Dates of the distinct-poster window in season `year_label`.
    pub fn users_window(&self, year_label: i32) -> DateRange {
        let start_md = self.report.users_window_start.unwrap_or(self.study.anchor_start);
        let days = self.report.users_window_days.unwrap_or(self.study.anchor_days);
        let start = start_md.in_season(year_label);
        let end = positions(start, days).last().unwrap_or(start);
        DateRange { start, end }
    }

    pub fn keyword_sets(&self) -> KeywordSets {
        KeywordSets(self.keywords.clone())
    }

    /// Replaces the method and the alpha list; both are recorded in the
    /// fingerprint.
    pub fn apply_overrides(&mut self, method: Option<Method>, alpha: Option<f64>) -> Result<()> {
        if let Some(m) = method {
            self.scan.method = m;
            self.fingerprint.push_str(&format!("\n# override method={m}"));
        }
        if let Some(a) = alpha {
            self.scan.alphas = vec![a];
            self.fingerprint.push_str(&format!("\n# override alpha={a}"));
        }
        self.validate()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.fingerprint.as_bytes()))
    }
}

/// Filter policy from any TOML file with a `[filters]` table, such as the
/// pipeline config. The keyword window starts at `[study] start` when given.
pub fn load_policy(path: &Path) -> Result<FilterPolicy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let toml_err = |source| Error::Toml { path: path.into(), source };
    let mut table: toml::Table = toml::from_str(&text).map_err(toml_err)?;
    let filters: FiltersSection = match table.remove("filters") {
        Some(v) => v.try_into().map_err(toml_err)?,
        None => FiltersSection::default(),
    };
    let start = table
        .get("study")
        .and_then(|s| s.get("start"))
        .and_then(|v| v.as_str().map(String::from).or_else(|| v.as_datetime().map(|d| d.to_string())))
        .map(|s| s.parse::<NaiveDate>().map_err(|e| Error::Config(format!("study start: {e}"))))
        .transpose()?
        .unwrap_or(DateRange::default().start);
    let policy = filters.policy(start);
    policy.validate()?;
    Ok(policy)
}
