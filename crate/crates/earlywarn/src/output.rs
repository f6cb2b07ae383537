//! Report files.
//!
//! Tables are tab-separated with a `#` header block naming the keyword set,
//! test method, window widths and alpha levels. Ratios carry two decimals,
//! statistics and p-values five. Absent values are written as `NA`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use earlywarn_core::geo::{Gazetteer, Polygon, RegionId};
use earlywarn_core::report::CountryTable;
use earlywarn_core::stats::{AnomalySegment, Method, PValueCurve, RegressionFit, TestResult};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::archive::create;
use crate::error::{Error, Result};

pub const NA: &str = "NA";

/// Statistic or p-value cell.
pub fn stat(x: f64) -> String {
    format!("{x:.5}")
}

pub fn opt_stat(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), stat)
}

/// `2019-2020` for season 2020.
pub fn season_name(label: i32) -> String {
    format!("{}-{}", label - 1, label)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub keyword_set: String,
    pub method: Method,
    pub widths: (u32, u32),
    pub alphas: Vec<f64>,
}

impl Header {
    fn block(&self, what: &str) -> String {
        let alphas: Vec<String> = self.alphas.iter().map(|a| format!("{a:.2}")).collect();
        format!(
            "# {what}\n# keyword_set={}\n# method={}\n# widths={}-{}\n# alpha={}\n",
            self.keyword_set,
            self.method,
            self.widths.0,
            self.widths.1,
            alphas.join(",")
        )
    }

    pub fn with_method(&self, method: Method) -> Header {
        Header { method, ..self.clone() }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// One averaged p-value curve; `baseline` is a season name or `mean`.
pub struct CurveRow<'a> {
    pub scope: String,
    pub baseline: String,
    pub curve: &'a PValueCurve,
}

pub fn format_curves(h: &Header, rows: &[CurveRow<'_>]) -> String {
    let mut s = h.block("p-values averaged over window widths");
    s.push_str("scope\tbaseline\tdate\tp_value\n");
    for r in rows {
        for (d, p) in r.curve.dates.iter().zip(&r.curve.p_values) {
            s.push_str(&format!("{}\t{}\t{d}\t{}\n", r.scope, r.baseline, opt_stat(*p)));
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Early,
    NewsEra,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::Early => "early",
            Section::NewsEra => "news-era",
        }
    }
}

pub struct AnomalyRow {
    pub section: Section,
    pub scope: String,
    pub baseline: String,
    pub segment: AnomalySegment,
}

/// Segments with their dates inclusive; news-era rows follow all early rows.
pub fn format_anomalies(h: &Header, cutoff: NaiveDate, rows: &[AnomalyRow]) -> String {
    let mut s = h.block("anomaly periods");
    s.push_str(&format!("# news_cutoff={cutoff}\n"));
    s.push_str("section\tscope\tbaseline\talpha\tstart\tend\tdays\tmin_p\n");
    for section in [Section::Early, Section::NewsEra] {
        for r in rows.iter().filter(|r| r.section == section) {
            let g = &r.segment;
            s.push_str(&format!(
                "{}\t{}\t{}\t{:.2}\t{}\t{}\t{}\t{}\n",
                section.as_str(),
                r.scope,
                r.baseline,
                g.alpha,
                g.start_date,
                g.end_date,
                (g.end_date - g.start_date).num_days() + 1,
                stat(g.min_p)
            ));
        }
    }
    s
}

/// One row per scope, one `statistic (p)` cell per baseline season.
pub fn format_season_tests(h: &Header, baselines: &[i32], rows: &[(String, Vec<Option<TestResult>>)]) -> String {
    let mut s = h.block("whole-window test of the focal season against each baseline");
    s.push_str("scope");
    for b in baselines {
        s.push_str(&format!("\t{}", season_name(*b)));
    }
    s.push('\n');
    for (scope, cells) in rows {
        s.push_str(scope);
        for c in cells {
            match c {
                Some(r) => s.push_str(&format!("\t{} ({})", stat(r.statistic), stat(r.p_value))),
                None => s.push_str(&format!("\t{NA}")),
            }
        }
        s.push('\n');
    }
    s
}

pub const TOTALS_LABEL: &str = "Total number of users";

pub fn format_region_tables(h: &Header, now: i32, prior: i32, tables: &[CountryTable]) -> String {
    let mut s = h.block("distinct posters per region");
    s.push_str(&format!("# users_now={}\n# users_prior={}\n", season_name(now), season_name(prior)));
    s.push_str("country\tcode\tregion\tusers_now\tusers_prior\trelative_variation\tabsolute_variation\n");
    for t in tables {
        for r in &t.rows {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                t.country.code(),
                r.region.code,
                r.region.name,
                r.users_now,
                r.users_prior,
                r.relative_variation,
                r.absolute_variation
            ));
        }
        let tot = &t.total;
        s.push_str(&format!(
            "{}\t\t{TOTALS_LABEL}\t{}\t{}\t{}\t{}\n",
            t.country.code(),
            tot.users_now,
            tot.users_prior,
            tot.relative_variation,
            tot.absolute_variation
        ));
    }
    s
}

/// Nonzero counts, largest first, ties by code.
pub fn format_region_counts(h: &Header, season: i32, counts: &[(RegionId, u64)]) -> String {
    let mut rows: Vec<_> = counts.iter().filter(|(_, n)| *n > 0).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.code.cmp(&b.0.code)));
    let mut s = h.block("distinct posters per region");
    s.push_str(&format!("# season={}\n", season_name(season)));
    s.push_str("code\tregion\tusers\n");
    for (r, n) in rows {
        s.push_str(&format!("{}\t{}\t{n}\n", r.code, r.name));
    }
    s
}

pub struct CumulativeRow {
    pub scope: String,
    pub season: i32,
    pub start: NaiveDate,
    /// `None` for an empty season.
    pub curve: Option<Vec<f64>>,
}

pub fn format_cumulative(h: &Header, rows: &[CumulativeRow]) -> String {
    let mut s = h.block("cumulative rescaled counts over the anchor window");
    s.push_str("scope\tseason\toffset\tdate\tvalue\n");
    for r in rows {
        match &r.curve {
            Some(c) => {
                for (i, (d, v)) in earlywarn_core::timeseries::positions(r.start, c.len() as u32).zip(c).enumerate() {
                    s.push_str(&format!("{}\t{}\t{i}\t{d}\t{}\n", r.scope, season_name(r.season), stat(*v)));
                }
            }
            None => s.push_str(&format!("{}\t{}\t{NA}\t{NA}\t{NA}\n", r.scope, season_name(r.season))),
        }
    }
    s
}

fn ring_json(ring: &[(f64, f64)]) -> Value {
    Value::Array(ring.iter().map(|(x, y)| json!([x, y])).collect())
}

fn geometry(polys: &[Polygon]) -> Value {
    let poly = |p: &Polygon| {
        let mut rings = vec![ring_json(&p.exterior)];
        rings.extend(p.holes.iter().map(|h| ring_json(h)));
        Value::Array(rings)
    };
    match polys {
        [one] => json!({"type": "Polygon", "coordinates": poly(one)}),
        many => json!({"type": "MultiPolygon", "coordinates": many.iter().map(poly).collect::<Vec<_>>()}),
    }
}

pub struct Choropleth {
    pub collection: Value,
    pub warnings: Vec<String>,
}

/// One feature per gazetteer region with a boundary, `value` 0 where the map
/// has no entry. Keys unknown to the gazetteer become geometry-less features
/// with a null value, each with a warning.
pub fn emit_choropleth(values: &BTreeMap<String, Value>, gaz: &Gazetteer) -> Result<Choropleth> {
    if !gaz.has_polygons() {
        return Err(earlywarn_core::Error::NoBoundaries.into());
    }
    let mut features = Vec::new();
    let mut warnings = Vec::new();
    let feature = |code: &str, name: &str, country: Option<&str>, value: Value, geom: Value| {
        let mut props = Map::new();
        props.insert("code".into(), json!(code));
        props.insert("name".into(), json!(name));
        props.insert("country".into(), country.map_or(Value::Null, |c| json!(c)));
        props.insert("value".into(), value);
        json!({"type": "Feature", "properties": props, "geometry": geom})
    };
    for (region, polys) in gaz.shapes() {
        let v = values.get(&region.code).cloned().unwrap_or(json!(0));
        features.push(feature(&region.code, &region.name, Some(region.country.code()), v, geometry(polys)));
    }
    for code in values.keys() {
        if gaz.shape(code).is_none() {
            let (name, country) = match gaz.region(code) {
                Some(r) => (r.name.as_str(), Some(r.country.code())),
                None => (code.as_str(), None),
            };
            warnings.push(format!("region {code} has no boundary; emitted with a null value"));
            features.push(feature(code, name, country, Value::Null, Value::Null));
        }
    }
    Ok(Choropleth { collection: json!({"type": "FeatureCollection", "features": features}), warnings })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum RegressionReport {
    Fit { slope: f64, intercept: f64, r2: f64, n_points: usize, regions: Vec<String> },
    Unavailable { error: String, n_points: usize },
}

impl RegressionReport {
    pub fn new(fit: earlywarn_core::Result<RegressionFit>, regions: Vec<String>) -> Self {
        match fit {
            Ok(f) => RegressionReport::Fit {
                slope: f.slope,
                intercept: f.intercept,
                r2: f.r2,
                n_points: f.n_points,
                regions,
            },
            Err(e) => RegressionReport::Unavailable { error: e.to_string(), n_points: regions.len() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use earlywarn_core::geo::Polygon;
    use earlywarn_core::report::{region_tables, RegionReportRow};
    use earlywarn_core::Country;

    fn header() -> Header {
        Header { keyword_set: "pneumonia".into(), method: Method::Ks, widths: (50, 70), alphas: vec![0.05, 0.1] }
    }

    fn region(code: &str, country: Country) -> RegionId {
        RegionId { code: code.into(), name: code.into(), country, level: "nuts1".into() }
    }

    fn gaz(with_shapes: bool) -> Gazetteer {
        let mut b = Gazetteer::builder();
        b.region(region("A1", Country::IT)).region(region("B1", Country::FR));
        if with_shapes {
            b.shape("A1", vec![Polygon::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])]);
            b.shape("B1", vec![Polygon::new(vec![(2.0, 0.0), (3.0, 0.0), (3.0, 1.0), (2.0, 1.0)])]);
        }
        b.build().unwrap()
    }

    #[test]
    fn header_records_method_widths_alpha() {
        let s = format_curves(&header(), &[]);
        assert!(s.contains("# method=ks\n# widths=50-70\n# alpha=0.05,0.10\n"), "{s}");
    }

    #[test]
    fn region_table_layout() {
        let rows = vec![
            RegionReportRow::new(region("ITC4", Country::IT), 201, 151).unwrap(),
            RegionReportRow::new(region("ITH4", Country::IT), 11, 2).unwrap(),
        ];
        let s = format_region_tables(&header(), 2020, 2019, &region_tables(rows).unwrap());
        let body: Vec<&str> = s.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[1], "IT\tITH4\tITH4\t11\t2\t4.50\t9");
        assert_eq!(body[3], "IT\t\tTotal number of users\t212\t153\t0.39\t59");
    }

    #[test]
    fn season_cells() {
        let r = TestResult { statistic: -0.824994, p_value: 0.25, n1: 3, n2: 4, method: Method::Ad };
        let s = format_season_tests(&header(), &[2015, 2016], &[("country-DE".into(), vec![Some(r), None])]);
        assert!(s.ends_with("scope\t2014-2015\t2015-2016\ncountry-DE\t-0.82499 (0.25000)\tNA\n"), "{s}");
    }

    #[test]
    fn choropleth_fills_zero_and_flags_unknown() {
        let g = gaz(true);
        let empty = emit_choropleth(&BTreeMap::new(), &g).unwrap();
        let vals: Vec<&Value> =
            empty.collection["features"].as_array().unwrap().iter().map(|f| &f["properties"]["value"]).collect();
        assert_eq!(vals, [&json!(0), &json!(0)]);

        let m = BTreeMap::from([("B1".to_string(), json!(5)), ("ZZ9".to_string(), json!(2))]);
        let c = emit_choropleth(&m, &g).unwrap();
        let f = c.collection["features"].as_array().unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f[0]["properties"]["value"], json!(0));
        assert_eq!(f[1]["properties"]["value"], json!(5));
        assert_eq!(f[2]["properties"]["value"], Value::Null);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn choropleth_needs_boundaries() {
        let err = emit_choropleth(&BTreeMap::new(), &gaz(false)).err().unwrap();
        assert_eq!(err.to_string(), "choropleth requires boundary file");
    }
}
