//! Stage functions and the full run.
//!
//! A run writes into `<out>/.incomplete` and moves the tree into place only
//! when every stage succeeded. On failure the partial tree is moved to
//! `<out>/failed/` together with `FAILURE.txt` naming the stage and cause.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use earlywarn_core::filters::{apply_filters, FilterPolicy, FilterStats};
use earlywarn_core::geo::{default_resolvers, resolve_user, Gazetteer, Outcome, RegionId, Resolution};
use earlywarn_core::ingest::{Archive, ArchiveStats, DateRange, MessageRecord, UserProfile};
use earlywarn_core::report::{region_tables, split_at_cutoff, RegionReportRow};
use earlywarn_core::stats::{
    extract_anomaly_periods, loglog_fit, multi_baseline_scan, run_test, AnchorRange, Method, MultiScan, PValueCurve,
    ScanConfig, SeasonRef, TestResult,
};
use earlywarn_core::timeseries::{
    aggregate_daily, cumulative_rescaled, merge_across_languages, positions, slice_positions, window_unique_users,
    CountMode, DailySeries, Scope, SeriesKey,
};
use earlywarn_core::Country;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::archive::{read_archive_files, read_jsonl, write_json, write_jsonl, KeywordSets, ReadOptions, Schema};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gazetteer::load_gazetteer;
use crate::output::{
    emit_choropleth, format_anomalies, format_cumulative, format_curves, format_region_counts, format_region_tables,
    format_season_tests, season_name, write_text, AnomalyRow, CumulativeRow, CurveRow, Header, RegressionReport,
    Section,
};
use crate::series_io::{read_series_dir, write_series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Filter,
    Georesolve,
    Aggregate,
    Detect,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<Error>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}

// ---------------------------------------------------------------------------
// ingest

pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const USERS_FILE: &str = "users.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const RESOLUTIONS_FILE: &str = "resolutions.jsonl";

pub fn ingest(
    paths: &[PathBuf],
    schema: &Schema,
    range: DateRange,
    sets: Option<&KeywordSets>,
    corrupt: f64,
) -> Result<Archive> {
    let opts = ReadOptions { schema, range, keyword_sets: sets, corrupt_threshold: corrupt };
    read_archive_files(paths, &opts)
}

pub fn write_records(dir: &Path, messages: &[MessageRecord], users: &[UserProfile]) -> Result<()> {
    write_jsonl(&dir.join(MESSAGES_FILE), messages)?;
    write_jsonl(&dir.join(USERS_FILE), users)
}

pub fn read_records(dir: &Path) -> Result<(Vec<MessageRecord>, Vec<UserProfile>)> {
    Ok((read_jsonl(&dir.join(MESSAGES_FILE))?, read_jsonl(&dir.join(USERS_FILE))?))
}

// ---------------------------------------------------------------------------
// filter

pub fn filter(
    messages: &[MessageRecord],
    users: &[UserProfile],
    policy: &FilterPolicy,
) -> Result<(Vec<MessageRecord>, FilterStats)> {
    let by_id: BTreeMap<String, UserProfile> = users.iter().map(|u| (u.author_id.clone(), u.clone())).collect();
    Ok(apply_filters(messages, &by_id, policy)?)
}

/// Users who authored at least one of `messages`, in input order.
pub fn authors_of<'a>(messages: &[MessageRecord], users: &'a [UserProfile]) -> Vec<&'a UserProfile> {
    let ids: BTreeSet<&str> = messages.iter().map(|m| m.author_id.as_str()).collect();
    users.iter().filter(|u| ids.contains(u.author_id.as_str())).collect()
}

// ---------------------------------------------------------------------------
// georesolve

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoStats {
    pub users: u64,
    pub resolved: u64,
    /// Resolved by majority with at least one dissenting vote.
    pub resolved_with_dissent: u64,
    pub unresolved: u64,
    pub vetoed: u64,
    pub conflicts: u64,
    pub resolution_rate: f64,
}

pub fn georesolve(users: &[&UserProfile], gaz: &Gazetteer) -> (Vec<Resolution>, GeoStats) {
    let resolvers = default_resolvers();
    let res: Vec<Resolution> = users.par_iter().map(|u| resolve_user(u, gaz, &resolvers)).collect();
    let mut s = GeoStats { users: res.len() as u64, ..GeoStats::default() };
    for r in &res {
        match &r.outcome {
            Outcome::Resolved(_) => {
                s.resolved += 1;
                s.resolved_with_dissent += r.has_dissent() as u64;
            }
            Outcome::Unresolved => {
                s.unresolved += 1;
                s.vetoed += r.is_vetoed() as u64;
            }
            Outcome::Conflict(_) => s.conflicts += 1,
        }
    }
    if s.users > 0 {
        s.resolution_rate = s.resolved as f64 / s.users as f64;
    }
    (res, s)
}

pub fn resolution_map(res: Vec<Resolution>) -> BTreeMap<String, Resolution> {
    res.into_iter().map(|r| (r.author_id.clone(), r)).collect()
}

// ---------------------------------------------------------------------------
// aggregate

/// Country series for every study country plus their all-countries sum, per
/// keyword set and count mode.
pub fn aggregate(
    messages: &[MessageRecord],
    resolutions: &BTreeMap<String, Resolution>,
    keyword_sets: &[String],
    range: &DateRange,
) -> Result<Vec<DailySeries>> {
    let keys: Vec<(String, CountMode)> = keyword_sets
        .iter()
        .flat_map(|s| [CountMode::Messages, CountMode::UniqueUsers].map(|m| (s.clone(), m)))
        .collect();
    let groups: Vec<Result<Vec<DailySeries>>> = keys
        .par_iter()
        .map(|(set, mode)| {
            let mut countries: Vec<DailySeries> = Country::ALL
                .iter()
                .map(|c| {
                    let key = SeriesKey { scope: Scope::Country(*c), keyword_set: set.clone(), mode: *mode };
                    aggregate_daily(messages, resolutions, &key, range)
                })
                .collect();
            let all = merge_across_languages(&countries)?;
            countries.push(all);
            Ok(countries)
        })
        .collect();
    let mut out = Vec::new();
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// detect

/// Anchor range actually scanned, and a warning when it was shortened to end
/// at the news cutoff.
pub fn scan_anchor(cfg: &PipelineConfig) -> Result<(AnchorRange, Option<String>)> {
    let anchor = cfg.anchor();
    let cutoff = cfg.study.news_cutoff;
    if cfg.study.allow_post_cutoff {
        return Ok((anchor, None));
    }
    let kept = anchor.dates(cfg.study.focal_season).take_while(|d| *d <= cutoff).count() as u32;
    if kept == 0 {
        return Err(Error::Config(format!(
            "the scan starts after the news cutoff {cutoff}; set allow_post_cutoff to scan it anyway"
        )));
    }
    if kept < anchor.days {
        let msg = format!("scan shortened from {} to {kept} days to end at the news cutoff {cutoff}", anchor.days);
        return Ok((AnchorRange { days: kept, ..anchor }, Some(msg)));
    }
    Ok((anchor, None))
}

pub struct ScopeDetection {
    pub scope: Scope,
    pub scan: MultiScan,
    /// Whole anchor window, per baseline, for each method.
    pub season_tests: Vec<(Method, Vec<Option<TestResult>>)>,
    pub cumulative: Vec<CumulativeRow>,
}

pub struct Detection {
    pub keyword_set: String,
    pub scopes: Vec<ScopeDetection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DetectStats {
    pub scans: u64,
    pub scanned_days: u32,
    pub skipped_widths: u64,
    pub gap_days: u64,
    pub segments_early: u64,
    pub segments_news_era: u64,
}

fn whole_window_test(
    method: Method,
    series: &DailySeries,
    focal: i32,
    baseline: i32,
    anchor: &AnchorRange,
    cfg: &ScanConfig,
) -> Option<TestResult> {
    let f = slice_positions(series, anchor.start.in_season(focal), anchor.days);
    let b = slice_positions(series, anchor.start.in_season(baseline), anchor.days);
    run_test(method, &f.counts, &b.counts, &cfg.test).ok()
}

fn detect_scope(
    series: &DailySeries,
    cfg: &PipelineConfig,
    anchor: &AnchorRange,
    scan_cfg: &ScanConfig,
) -> Result<ScopeDetection> {
    let focal = SeasonRef { series, year_label: cfg.study.focal_season };
    let baselines: Vec<SeasonRef<'_>> =
        cfg.study.baseline_seasons.iter().map(|y| SeasonRef { series, year_label: *y }).collect();
    let scan = multi_baseline_scan(focal, &baselines, &cfg.study.baseline_seasons, anchor, scan_cfg)?;
    let season_tests = [Method::Ks, Method::Ad]
        .into_iter()
        .map(|m| {
            let cells = cfg
                .study
                .baseline_seasons
                .iter()
                .map(|b| whole_window_test(m, series, cfg.study.focal_season, *b, anchor, scan_cfg))
                .collect();
            (m, cells)
        })
        .collect();
    let mut seasons = vec![cfg.study.focal_season];
    seasons.extend(&cfg.study.baseline_seasons);
    let cumulative = seasons
        .into_iter()
        .map(|season| {
            let start = anchor.start.in_season(season);
            let slice = slice_positions(series, start, anchor.days);
            CumulativeRow {
                scope: series.key.scope.to_string(),
                season,
                start,
                curve: cumulative_rescaled(&slice.counts).ok(),
            }
        })
        .collect();
    Ok(ScopeDetection { scope: series.key.scope.clone(), scan, season_tests, cumulative })
}

/// Scans every country and all-countries series of `mode`, per keyword set.
pub fn detect(series: &[DailySeries], cfg: &PipelineConfig, method: Method) -> Result<Vec<Detection>> {
    let (anchor, _) = scan_anchor(cfg)?;
    let scan_cfg = cfg.scan.scan_config(method);
    let mut out = Vec::new();
    for set in cfg.keywords.keys() {
        let mut wanted: Vec<&DailySeries> = series
            .iter()
            .filter(|s| {
                &s.key.keyword_set == set
                    && s.key.mode == cfg.study.count_mode
                    && !matches!(s.key.scope, Scope::Region(_))
            })
            .collect();
        wanted.sort_by(|a, b| a.key.scope.cmp(&b.key.scope));
        let scopes = wanted.par_iter().map(|s| detect_scope(s, cfg, &anchor, &scan_cfg)).collect::<Result<Vec<_>>>()?;
        out.push(Detection { keyword_set: set.clone(), scopes });
    }
    Ok(out)
}

fn curve_rows<'a>(d: &'a Detection) -> Vec<CurveRow<'a>> {
    let mut rows = Vec::new();
    for s in &d.scopes {
        for (label, out) in &s.scan.per_baseline {
            rows.push(CurveRow { scope: s.scope.to_string(), baseline: season_name(*label), curve: &out.curve });
        }
        rows.push(CurveRow { scope: s.scope.to_string(), baseline: "mean".into(), curve: &s.scan.curve });
    }
    rows
}

/// Anomaly rows for the prior-season curve and the baseline mean, per alpha.
fn anomaly_rows(d: &Detection, cfg: &PipelineConfig) -> Result<Vec<AnomalyRow>> {
    let prior = cfg.prior_season();
    let mut rows = Vec::new();
    for s in &d.scopes {
        let mut curves: Vec<(String, &PValueCurve)> =
            s.scan.per_baseline.iter().filter(|(l, _)| *l == prior).map(|(l, o)| (season_name(*l), &o.curve)).collect();
        curves.push(("mean".into(), &s.scan.curve));
        for (baseline, curve) in curves {
            for alpha in &cfg.scan.alphas {
                let segs = extract_anomaly_periods(curve, *alpha)?;
                let (early, news) = split_at_cutoff(&segs, cfg.study.news_cutoff);
                for (section, list) in [(Section::Early, early), (Section::NewsEra, news)] {
                    rows.extend(list.into_iter().map(|segment| AnomalyRow {
                        section,
                        scope: s.scope.to_string(),
                        baseline: baseline.clone(),
                        segment,
                    }));
                }
            }
        }
    }
    Ok(rows)
}

pub fn header(cfg: &PipelineConfig, set: &str, method: Method) -> Header {
    Header {
        keyword_set: set.into(),
        method,
        widths: (cfg.scan.w_min, cfg.scan.w_max),
        alphas: cfg.scan.alphas.clone(),
    }
}

pub const CURVES_FILE: &str = "curves.tsv";
pub const ANOMALIES_FILE: &str = "anomalies.tsv";
pub const CUMULATIVE_FILE: &str = "cumulative.tsv";

pub fn write_detection(
    dir: &Path,
    cfg: &PipelineConfig,
    method: Method,
    detections: &[Detection],
) -> Result<DetectStats> {
    let (anchor, _) = scan_anchor(cfg)?;
    let mut st = DetectStats { scanned_days: anchor.days, ..DetectStats::default() };
    for d in detections {
        let base = dir.join(&d.keyword_set);
        let h = header(cfg, &d.keyword_set, method);
        write_text(&base.join(CURVES_FILE), &format_curves(&h, &curve_rows(d)))?;
        let rows = anomaly_rows(d, cfg)?;
        st.segments_early += rows.iter().filter(|r| r.section == Section::Early).count() as u64;
        st.segments_news_era += rows.iter().filter(|r| r.section == Section::NewsEra).count() as u64;
        write_text(&base.join(ANOMALIES_FILE), &format_anomalies(&h, cfg.study.news_cutoff, &rows))?;
        for m in [Method::Ks, Method::Ad] {
            let rows: Vec<(String, Vec<Option<TestResult>>)> = d
                .scopes
                .iter()
                .map(|s| {
                    (
                        s.scope.to_string(),
                        s.season_tests.iter().find(|(k, _)| *k == m).map(|(_, v)| v.clone()).unwrap_or_default(),
                    )
                })
                .collect();
            let text = format_season_tests(&h.with_method(m), &cfg.study.baseline_seasons, &rows);
            write_text(&base.join(format!("season_tests_{m}.tsv")), &text)?;
        }
        let cumulative: Vec<CumulativeRow> = d
            .scopes
            .iter()
            .flat_map(|s| s.cumulative.iter())
            .map(|r| CumulativeRow { scope: r.scope.clone(), season: r.season, start: r.start, curve: r.curve.clone() })
            .collect();
        write_text(&base.join(CUMULATIVE_FILE), &format_cumulative(&h, &cumulative))?;
        for s in &d.scopes {
            st.scans += s.scan.per_baseline.len() as u64;
            st.skipped_widths += s.scan.per_baseline.iter().map(|(_, o)| o.skipped().count() as u64).sum::<u64>();
            st.gap_days += s.scan.curve.p_values.iter().filter(|p| p.is_none()).count() as u64;
        }
    }
    Ok(st)
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportStats {
    pub regions_with_users: u64,
    pub choropleth: String,
    pub regression_points: u64,
}

pub struct ReportInput<'a> {
    pub messages: &'a [MessageRecord],
    pub resolutions: &'a BTreeMap<String, Resolution>,
    pub gazetteer: &'a Gazetteer,
}

fn rounded(x: f64) -> Value {
    json!((x * 100.0).round() / 100.0)
}

/// Region tables, choropleths and the population regression per keyword set.
pub fn write_report(
    dir: &Path,
    cfg: &PipelineConfig,
    method: Method,
    input: &ReportInput<'_>,
) -> Result<(ReportStats, Vec<String>)> {
    let focal = cfg.study.focal_season;
    let prior = cfg.prior_season();
    let (now_w, prior_w) = (cfg.users_window(focal), cfg.users_window(prior));
    let regions: Vec<&RegionId> = input.gazetteer.regions().collect();
    let mut stats = ReportStats::default();
    let mut warnings = Vec::new();
    for set in cfg.keywords.keys() {
        let base = dir.join(set);
        let h = header(cfg, set, method);
        let counts: Vec<(RegionId, u64, u64)> = regions
            .par_iter()
            .map(|r| {
                let scope = Scope::Region(r.code.clone());
                let now = window_unique_users(input.messages, input.resolutions, &scope, set, &now_w);
                let before = window_unique_users(input.messages, input.resolutions, &scope, set, &prior_w);
                ((*r).clone(), now, before)
            })
            .collect();
        let rows = counts
            .iter()
            .filter(|(_, n, p)| *n > 0 || *p > 0)
            .map(|(r, n, p)| RegionReportRow::new(r.clone(), *n, *p))
            .collect::<earlywarn_core::Result<Vec<_>>>()?;
        stats.regions_with_users += rows.iter().filter(|r| r.users_now > 0).count() as u64;
        let tables = region_tables(rows.clone())?;
        write_text(&base.join("region_users.tsv"), &format_region_tables(&h, focal, prior, &tables))?;
        let now_counts: Vec<(RegionId, u64)> = counts.iter().map(|(r, n, _)| (r.clone(), *n)).collect();
        write_text(&base.join("region_counts.tsv"), &format_region_counts(&h, focal, &now_counts))?;

        let users: BTreeMap<String, Value> = now_counts.iter().map(|(r, n)| (r.code.clone(), json!(n))).collect();
        let variation: BTreeMap<String, Value> = rows
            .iter()
            .map(|r| {
                let v = match r.relative_variation {
                    earlywarn_core::stats::RelativeVariation::Value(x) => rounded(x),
                    earlywarn_core::stats::RelativeVariation::New => json!("new"),
                };
                (r.region.code.clone(), v)
            })
            .collect();
        match (emit_choropleth(&users, input.gazetteer), emit_choropleth(&variation, input.gazetteer)) {
            (Ok(u), Ok(v)) => {
                write_json(&base.join("choropleth_users.geojson"), &u.collection)?;
                write_json(&base.join("choropleth_variation.geojson"), &v.collection)?;
                warnings.extend(u.warnings);
                warnings.extend(v.warnings);
                stats.choropleth = "written".into();
            }
            (Err(e), _) | (_, Err(e)) => {
                warnings.push(format!("{set}: choropleth skipped: {e}"));
                stats.choropleth = format!("skipped: {e}");
            }
        }

        let points: Vec<(&RegionId, f64, f64)> = counts
            .iter()
            .filter(|(_, n, _)| *n > 0)
            .filter_map(|(r, n, _)| input.gazetteer.population(&r.code).map(|p| (r, p as f64, *n as f64)))
            .collect();
        stats.regression_points = points.len() as u64;
        let xy: Vec<(f64, f64)> = points.iter().map(|(_, x, y)| (*x, *y)).collect();
        let report = RegressionReport::new(loglog_fit(&xy), points.iter().map(|(r, _, _)| r.code.clone()).collect());
        write_json(&base.join("regression.json"), &report)?;
    }
    Ok((stats, warnings))
}

// ---------------------------------------------------------------------------
// full run

#[derive(Debug, Serialize)]
pub struct StageStats {
    pub ingest: ArchiveStats,
    pub filter: FilterStats,
    pub georesolve: GeoStats,
    pub series: u64,
    pub detect: DetectStats,
    pub report: ReportStats,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub method: Method,
    pub widths: (u32, u32),
    pub alphas: Vec<f64>,
    pub focal_season: String,
    pub baseline_seasons: Vec<String>,
    pub count_mode: CountMode,
    pub anchor_start: String,
    pub anchor_days: u32,
    pub news_cutoff: String,
    pub stages: StageStats,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILED_DIR: &str = "failed";
const WORK_DIR: &str = ".incomplete";

fn relative_files(root: &Path) -> Result<Vec<String>> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<String>) -> Result<()> {
        for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let p = e.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() {
                walk(&p, root, out)?;
            } else {
                let rel = p.strip_prefix(root).expect("under root");
                out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

fn run_stages(cfg: &PipelineConfig, work: &Path) -> std::result::Result<(), StageError> {
    let method = cfg.scan.method;
    let range = cfg.study_range();
    let mut warnings = Vec::new();

    let schema = match cfg.schema_path() {
        Some(p) => Schema::load(&p).at(Stage::Config)?,
        None => Schema::default(),
    };
    let sets = cfg.keyword_sets();
    let archive =
        ingest(&cfg.archive_paths(), &schema, range, Some(&sets), cfg.archive.corrupt_threshold).at(Stage::Ingest)?;
    let stage_dir = work.join("stages");
    write_records(&stage_dir.join("ingest"), &archive.messages, &archive.users).at(Stage::Ingest)?;
    write_json(&stage_dir.join("ingest").join(STATS_FILE), &archive.stats).at(Stage::Ingest)?;
    log::info!(
        "ingest: {} unique messages from {} records",
        archive.stats.unique_messages,
        archive.stats.total_records
    );

    let policy = cfg.filters.policy(cfg.study.start);
    let (kept, fstats) = filter(&archive.messages, &archive.users, &policy).at(Stage::Filter)?;
    let kept_users: Vec<UserProfile> = authors_of(&kept, &archive.users).into_iter().cloned().collect();
    write_records(&stage_dir.join("filter"), &kept, &kept_users).at(Stage::Filter)?;
    write_json(&stage_dir.join("filter").join(STATS_FILE), &fstats).at(Stage::Filter)?;
    log::info!("filter: {} of {} messages kept", fstats.survivors_messages, fstats.input_messages);

    let boundaries = cfg.boundaries_path();
    let gaz = load_gazetteer(&cfg.gazetteer_path(), boundaries.as_deref()).at(Stage::Georesolve)?;
    let user_refs: Vec<&UserProfile> = kept_users.iter().collect();
    let (res, gstats) = georesolve(&user_refs, &gaz);
    write_jsonl(&stage_dir.join("georesolve").join(RESOLUTIONS_FILE), &res).at(Stage::Georesolve)?;
    write_json(&stage_dir.join("georesolve").join(STATS_FILE), &gstats).at(Stage::Georesolve)?;
    let resolutions = resolution_map(res);
    log::info!("georesolve: {} of {} posters placed", gstats.resolved, gstats.users);

    let set_names: Vec<String> = cfg.keywords.keys().cloned().collect();
    let series = aggregate(&kept, &resolutions, &set_names, &range).at(Stage::Aggregate)?;
    for s in &series {
        write_series(&work.join("series"), s).at(Stage::Aggregate)?;
    }

    let (_, anchor_warning) = scan_anchor(cfg).at(Stage::Detect)?;
    warnings.extend(anchor_warning);
    let detections = detect(&series, cfg, method).at(Stage::Detect)?;
    let reports = work.join("reports");
    let dstats = write_detection(&reports, cfg, method, &detections).at(Stage::Detect)?;

    let input = ReportInput { messages: &kept, resolutions: &resolutions, gazetteer: &gaz };
    let (rstats, rwarn) = write_report(&reports, cfg, method, &input).at(Stage::Report)?;
    warnings.extend(rwarn);
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut outputs = relative_files(work).at(Stage::Report)?;
    outputs.push(MANIFEST_FILE.into());
    outputs.sort();
    let manifest = Manifest {
        config_sha256: cfg.hash(),
        method,
        widths: (cfg.scan.w_min, cfg.scan.w_max),
        alphas: cfg.scan.alphas.clone(),
        focal_season: season_name(cfg.study.focal_season),
        baseline_seasons: cfg.study.baseline_seasons.iter().map(|b| season_name(*b)).collect(),
        count_mode: cfg.study.count_mode,
        anchor_start: cfg.study.anchor_start.to_string(),
        anchor_days: cfg.study.anchor_days,
        news_cutoff: cfg.study.news_cutoff.to_string(),
        stages: StageStats {
            ingest: archive.stats,
            filter: fstats,
            georesolve: gstats,
            series: series.len() as u64,
            detect: dstats,
            report: rstats,
        },
        warnings,
        outputs,
    };
    write_json(&work.join(MANIFEST_FILE), &manifest).at(Stage::Report)
}

fn move_into(work: &Path, out: &Path) -> Result<()> {
    for e in std::fs::read_dir(work).map_err(|e| Error::io(work, e))? {
        let from = e.map_err(|e| Error::io(work, e))?.path();
        let to = out.join(from.file_name().expect("entry name"));
        remove_path(&to)?;
        std::fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
    }
    std::fs::remove_dir(work).map_err(|e| Error::io(work, e))
}

fn remove_path(p: &Path) -> Result<()> {
    if p.is_dir() {
        std::fs::remove_dir_all(p).map_err(|e| Error::io(p, e))
    } else if p.exists() {
        std::fs::remove_file(p).map_err(|e| Error::io(p, e))
    } else {
        Ok(())
    }
}

/// Runs every stage into `out`. Earlier outputs of the same names are
/// replaced; a stale `failed/` tree is removed on success.
pub fn run(cfg: &PipelineConfig, out: &Path) -> std::result::Result<(), StageError> {
    let work = out.join(WORK_DIR);
    let prepare = || -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        remove_path(&work)?;
        std::fs::create_dir_all(&work).map_err(|e| Error::io(&work, e))
    };
    cfg.check_inputs().at(Stage::Config)?;
    prepare().at(Stage::Config)?;
    match run_stages(cfg, &work) {
        Ok(()) => {
            remove_path(&out.join(FAILED_DIR)).at(Stage::Report)?;
            move_into(&work, out).at(Stage::Report)
        }
        Err(e) => {
            let failed = out.join(FAILED_DIR);
            let record = || -> Result<()> {
                remove_path(&failed)?;
                std::fs::rename(&work, &failed).map_err(|err| Error::io(&failed, err))?;
                write_text(&failed.join("FAILURE.txt"), &format!("stage: {}\ncause: {}\n", e.stage, e.source))
            };
            if let Err(inner) = record() {
                log::error!("could not record failure: {inner}");
            }
            Err(e)
        }
    }
}

/// Reads a series directory written by [`aggregate`].
pub fn load_series(dir: &Path) -> Result<Vec<DailySeries>> {
    read_series_dir(dir)
}

/// Dates of the scanned focal days.
pub fn scanned_dates(cfg: &PipelineConfig) -> Result<Vec<chrono::NaiveDate>> {
    let (anchor, _) = scan_anchor(cfg)?;
    Ok(positions(anchor.start.in_season(cfg.study.focal_season), anchor.days).collect())
}
