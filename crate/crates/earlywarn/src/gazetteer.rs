//! Gazetteer files.
//!
//! The alias table is comma-separated with the header
//! `kind,key,value,country,level,population` and one of four row kinds:
//!
//! | kind      | key          | value                | country | level | population |
//! |-----------|--------------|----------------------|---------|-------|------------|
//! | `region`  | region code  | display name         | ISO     | tier  | optional   |
//! | `alias`   | place name   | region code          |         |       |            |
//! | `country` | place name   | study country ISO    |         |       |            |
//! | `foreign` | place name   | foreign country code |         |       |            |
//!
//! Lines starting with `#` are comments. The optional boundary file is a
//! GeoJSON feature collection with one `Polygon` or `MultiPolygon` feature per
//! region and `code`, `name` and `population` properties.

use std::collections::BTreeSet;
use std::path::Path;

use earlywarn_core::geo::{AliasTarget, Gazetteer, GazetteerBuilder, Polygon, RegionId};
use earlywarn_core::Country;
use serde_json::Value;

use crate::error::{Error, Result};

struct Row {
    kind: String,
    key: String,
    value: String,
    country: String,
    level: String,
    population: Option<u64>,
}

impl Row {
    /// Trailing empty columns may be omitted.
    fn parse(path: &Path, rec: &csv::StringRecord) -> Result<Row> {
        let col = |i: usize| rec.get(i).unwrap_or("").to_string();
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 3 {
            return Err(Error::format(path, format!("line {line}: expected at least kind,key,value")));
        }
        let population = match rec.get(5).unwrap_or("") {
            "" => None,
            p => Some(p.parse().map_err(|e| Error::format(path, format!("line {line}: population {p:?}: {e}")))?),
        };
        Ok(Row { kind: col(0), key: col(1), value: col(2), country: col(3), level: col(4), population })
    }
}

fn country(path: &Path, code: &str) -> Result<Country> {
    Country::from_code(code).ok_or_else(|| Error::format(path, format!("unknown study country {code:?}")))
}

fn read_table(path: &Path, b: &mut GazetteerBuilder) -> Result<BTreeSet<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.into(), source })?;
    let mut with_population = BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| Error::Csv { path: path.into(), source })?;
        let row = Row::parse(path, &rec)?;
        match row.kind.as_str() {
            "region" => {
                let c = country(path, &row.country)?;
                b.region(RegionId { code: row.key.clone(), name: row.value, country: c, level: row.level });
                if let Some(p) = row.population {
                    b.population(&row.key, p);
                    with_population.insert(row.key);
                }
            }
            "alias" => {
                b.alias(&row.key, AliasTarget::Region(row.value));
            }
            "country" => {
                b.alias(&row.key, AliasTarget::Country(country(path, &row.value)?));
            }
            "foreign" => {
                b.alias(&row.key, AliasTarget::Foreign(row.value));
            }
            other => return Err(Error::format(path, format!("unknown row kind {other:?}"))),
        }
    }
    Ok(with_population)
}

fn ring(path: &Path, v: &Value) -> Result<Vec<(f64, f64)>> {
    let pts = v.as_array().ok_or_else(|| Error::format(path, "ring is not an array"))?;
    pts.iter()
        .map(|p| match p.as_array().map(Vec::as_slice) {
            Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(Error::format(path, "non-numeric coordinate")),
            },
            _ => Err(Error::format(path, "position needs two coordinates")),
        })
        .collect()
}

fn polygon(path: &Path, v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| Error::format(path, "polygon is not an array of rings"))?;
    let mut it = rings.iter();
    let exterior = ring(path, it.next().ok_or_else(|| Error::format(path, "polygon without rings"))?)?;
    let holes = it.map(|r| ring(path, r)).collect::<Result<_>>()?;
    Ok(Polygon { exterior, holes })
}

/// Polygons and population per feature code.
pub type BoundaryFeature = (String, Vec<Polygon>, Option<u64>);

pub fn read_boundaries(path: &Path) -> Result<Vec<BoundaryFeature>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::format(path, "expected a FeatureCollection"));
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| Error::format(path, "no features"))?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let props = f.get("properties");
        let code = props
            .and_then(|p| p.get("code"))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::format(path, "feature without a code property"))?;
        let population = props.and_then(|p| p.get("population")).and_then(Value::as_u64);
        let geom = f.get("geometry").ok_or_else(|| Error::format(path, format!("feature {code} has no geometry")))?;
        let coords =
            geom.get("coordinates").ok_or_else(|| Error::format(path, format!("feature {code} has no coordinates")))?;
        let polys = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![polygon(path, coords)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| Error::format(path, "multipolygon is not an array"))?
                .iter()
                .map(|p| polygon(path, p))
                .collect::<Result<_>>()?,
            other => return Err(Error::format(path, format!("feature {code}: unsupported geometry {other:?}"))),
        };
        out.push((code.to_string(), polys, population));
    }
    Ok(out)
}

/// Loads and validates a gazetteer. Populations in the alias table take
/// precedence over those in the boundary file.
pub fn load_gazetteer(table: &Path, boundaries: Option<&Path>) -> Result<Gazetteer> {
    let mut b = Gazetteer::builder();
    let with_population = read_table(table, &mut b)?;
    if let Some(path) = boundaries {
        for (code, polys, population) in read_boundaries(path)? {
            b.shape(&code, polys);
            if let Some(p) = population.filter(|_| !with_population.contains(&code)) {
                b.population(&code, p);
            }
        }
    }
    Ok(b.build()?)
}
