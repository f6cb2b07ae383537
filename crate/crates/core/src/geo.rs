//! Offline geo-resolution of posters to study regions.
//!
//! Three resolvers vote on each poster: two alias-table lookups that read the
//! location text in opposite token orders, and a point-in-polygon lookup when
//! the archive carries coordinates. [`cross_check`] combines the votes; any
//! vote for a place outside the study countries vetoes the poster.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::filters::fold_case;
use crate::ingest::UserProfile;
use crate::lang::Country;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId {
    pub code: String,
    pub name: String,
    pub country: Country,
    /// Administrative tier used for this country, e.g. `nuts1`, `nuts2`.
    pub level: String,
}

/// What an alias names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AliasTarget {
    Region(String),
    /// A study country as a whole; too coarse to vote for a region.
    Country(Country),
    /// A place outside the study countries, by free-form country code.
    Foreign(String),
}

/// A single resolver's opinion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Candidate {
    Region(RegionId),
    Foreign(String),
}

/// Longitude/latitude vertex.
pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Self {
        Polygon { exterior, holes: Vec::new() }
    }

    fn rings(&self) -> impl Iterator<Item = &[Point]> {
        core::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLocation {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    regions: BTreeMap<String, RegionId>,
    aliases: BTreeMap<String, AliasTarget>,
    shapes: BTreeMap<String, Vec<Polygon>>,
    population: BTreeMap<String, u64>,
}

impl Gazetteer {
    pub fn builder() -> GazetteerBuilder {
        GazetteerBuilder::default()
    }

    pub fn region(&self, code: &str) -> Option<&RegionId> {
        self.regions.get(code)
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionId> {
        self.regions.values()
    }

    pub fn alias(&self, normalized: &str) -> Option<&AliasTarget> {
        self.aliases.get(normalized)
    }

    pub fn has_polygons(&self) -> bool {
        !self.shapes.is_empty()
    }

    pub fn shape(&self, code: &str) -> Option<&[Polygon]> {
        self.shapes.get(code).map(Vec::as_slice)
    }

    pub fn shapes(&self) -> impl Iterator<Item = (&RegionId, &[Polygon])> {
        self.shapes.iter().map(|(c, p)| (&self.regions[c], p.as_slice()))
    }

    pub fn population(&self, code: &str) -> Option<u64> {
        self.population.get(code).copied()
    }
}

#[derive(Debug, Default)]
pub struct GazetteerBuilder {
    regions: BTreeMap<String, RegionId>,
    aliases: BTreeMap<String, AliasTarget>,
    shapes: BTreeMap<String, Vec<Polygon>>,
    population: BTreeMap<String, u64>,
    errors: Vec<String>,
}

impl GazetteerBuilder {
    /// Registers a region; its display name and code become aliases.
    pub fn region(&mut self, region: RegionId) -> &mut Self {
        if region.code.is_empty() {
            self.errors.push("empty region code".into());
            return self;
        }
        if self.regions.contains_key(&region.code) {
            self.errors.push(format!("duplicate region code {}", region.code));
            return self;
        }
        let code = region.code.clone();
        let name = region.name.clone();
        self.regions.insert(code.clone(), region);
        self.alias(&name, AliasTarget::Region(code.clone()));
        self.alias(&code, AliasTarget::Region(code.clone()));
        self
    }

    /// Re-registering an alias with the same target is a no-op; a different
    /// target is a validation error.
    pub fn alias(&mut self, name: &str, target: AliasTarget) -> &mut Self {
        let key = normalize_place(name);
        if key.is_empty() {
            return self;
        }
        match self.aliases.get(&key) {
            Some(existing) if *existing != target => {
                self.errors.push(format!("alias {key:?} maps to {existing:?} and {target:?}"));
            }
            Some(_) => {}
            None => {
                self.aliases.insert(key, target);
            }
        }
        self
    }

    pub fn shape(&mut self, code: &str, polygons: Vec<Polygon>) -> &mut Self {
        self.shapes.entry(code.to_owned()).or_default().extend(polygons);
        self
    }

    pub fn population(&mut self, code: &str, inhabitants: u64) -> &mut Self {
        if inhabitants == 0 {
            self.errors.push(format!("population of {code} must be positive"));
        }
        self.population.insert(code.to_owned(), inhabitants);
        self
    }

    pub fn build(mut self) -> Result<Gazetteer> {
        for (alias, target) in &self.aliases {
            if let AliasTarget::Region(code) = target {
                if !self.regions.contains_key(code) {
                    self.errors.push(format!("alias {alias:?} names unknown region {code}"));
                }
            }
        }
        for code in self.shapes.keys().chain(self.population.keys()) {
            if !self.regions.contains_key(code) {
                self.errors.push(format!("unknown region {code}"));
            }
        }
        for polys in self.shapes.values_mut() {
            for p in polys.iter_mut() {
                close_open(&mut p.exterior);
                p.holes.iter_mut().for_each(close_open);
            }
        }
        if let Some(e) = self.errors.into_iter().next() {
            return Err(Error::Gazetteer(e));
        }
        validate_shapes(&self.shapes)?;
        Ok(Gazetteer { regions: self.regions, aliases: self.aliases, shapes: self.shapes, population: self.population })
    }
}

/// Drops a repeated closing vertex so rings are stored open.
fn close_open(ring: &mut Vec<Point>) {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
}

// ---------------------------------------------------------------------------
// Place-name normalization and alias lookup

fn is_separator(c: char) -> bool {
    matches!(c, ',' | ';' | '/' | '|' | '•' | '·' | '\n')
}

/// Case fold, turn punctuation and symbols into spaces, collapse whitespace.
pub fn normalize_place(s: &str) -> String {
    let folded = fold_case(s);
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for c in folded.chars() {
        if c.is_alphanumeric() || is_combining_mark(c) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F)
}

/// Comma-separated (and `/`, `|`, ` - `) parts of a location string, each
/// normalized, most specific first.
pub fn place_tokens(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for chunk in s.split(is_separator) {
        for piece in chunk.split(" - ").flat_map(|p| p.split(" – ")) {
            let n = normalize_place(piece);
            if !n.is_empty() {
                parts.push(n);
            }
        }
    }
    parts
}

/// Word n-grams of a token, longest first, leftmost first.
fn lookup_token<'g>(gaz: &'g Gazetteer, token: &str, out_country: &mut Option<Country>) -> Option<&'g AliasTarget> {
    let words: Vec<&str> = token.split(' ').collect();
    for len in (1..=words.len()).rev() {
        for start in 0..=words.len() - len {
            let gram = words[start..start + len].join(" ");
            match gaz.alias(&gram) {
                Some(AliasTarget::Country(c)) => {
                    out_country.get_or_insert(*c);
                }
                Some(t) => return Some(t),
                None => {}
            }
        }
    }
    None
}

fn lookup_tokens<'a>(gaz: &Gazetteer, tokens: impl Iterator<Item = &'a String>) -> Option<Candidate> {
    let mut country_hint = None;
    for token in tokens {
        match lookup_token(gaz, token, &mut country_hint) {
            Some(AliasTarget::Region(code)) => return Some(Candidate::Region(gaz.regions[code].clone())),
            Some(AliasTarget::Foreign(c)) => return Some(Candidate::Foreign(c.clone())),
            _ => {}
        }
    }
    None
}

/// Alias lookup trying the most specific token first. `None` means
/// unresolved; no fuzzy guessing is done.
pub fn resolve_location(location_text: &str, gaz: &Gazetteer) -> Option<Candidate> {
    let tokens = place_tokens(location_text);
    lookup_tokens(gaz, tokens.iter())
}

/// Same lookup with the least specific token first.
pub fn resolve_location_general_first(location_text: &str, gaz: &Gazetteer) -> Option<Candidate> {
    let tokens = place_tokens(location_text);
    lookup_tokens(gaz, tokens.iter().rev())
}

// ---------------------------------------------------------------------------
// Point in polygon

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    cross == 0.0 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

/// Even-odd rule over every ring of every polygon of a region, with a
/// horizontal ray towards +x.
pub fn locate(polygons: &[Polygon], p: Point) -> PointLocation {
    let mut inside = false;
    for poly in polygons {
        for ring in poly.rings() {
            for (a, b) in ring_edges(ring) {
                if on_segment(p, a, b) {
                    return PointLocation::Boundary;
                }
                if (a.1 > p.1) != (b.1 > p.1) {
                    let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
                    if p.0 < x {
                        inside = !inside;
                    }
                }
            }
        }
    }
    if inside {
        PointLocation::Inside
    } else {
        PointLocation::Outside
    }
}

/// Region containing `(lat, lon)`. Points on a shared boundary go to the
/// smallest region code.
pub fn assign_region(lat: f64, lon: f64, gaz: &Gazetteer) -> Result<Option<RegionId>> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(contract(format!("coordinates out of range: ({lat}, {lon})")));
    }
    if !gaz.has_polygons() {
        return Err(contract("point assignment needs region polygons"));
    }
    // BTreeMap iteration is in code order, so the first hit is the smallest.
    Ok(gaz
        .shapes
        .iter()
        .find(|(_, polys)| locate(polys, (lon, lat)) != PointLocation::Outside)
        .map(|(code, _)| gaz.regions[code].clone()))
}

// ---------------------------------------------------------------------------
// Shape validation

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Segments cross at a single point interior to both.
fn proper_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Segments share any point.
fn touches(a: Point, b: Point, c: Point, d: Point) -> bool {
    proper_cross(a, b, c, d) || on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min: Point,
    max: Point,
}

impl BBox {
    fn of(points: impl Iterator<Item = Point>) -> Self {
        let mut b = BBox { min: (f64::INFINITY, f64::INFINITY), max: (f64::NEG_INFINITY, f64::NEG_INFINITY) };
        for p in points {
            b.min = (b.min.0.min(p.0), b.min.1.min(p.1));
            b.max = (b.max.0.max(p.0), b.max.1.max(p.1));
        }
        b
    }

    fn overlaps(&self, o: &BBox) -> bool {
        self.min.0 <= o.max.0 && o.min.0 <= self.max.0 && self.min.1 <= o.max.1 && o.min.1 <= self.max.1
    }

    fn contains(&self, p: Point) -> bool {
        p.0 >= self.min.0 && p.0 <= self.max.0 && p.1 >= self.min.1 && p.1 <= self.max.1
    }
}

fn ring_is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // only the shared vertex may touch
                let shared = if j == i + 1 { b } else { a };
                let other = if j == i + 1 { d } else { c };
                let mine = if j == i + 1 { a } else { b };
                if on_segment(other, a, b) && other != shared || on_segment(mine, c, d) && mine != shared {
                    return false;
                }
            } else if touches(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A point strictly inside the polygon: midpoint of the first inside span on
/// a horizontal line that avoids every vertex.
fn interior_point(poly: &Polygon) -> Option<Point> {
    let mut ys: Vec<f64> = poly.exterior.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    if ys.len() < 2 {
        return None;
    }
    let k = (ys.len() - 1) / 2;
    let y = (ys[k] + ys[k + 1]) / 2.0;
    let mut xs = Vec::new();
    for ring in poly.rings() {
        for (a, b) in ring_edges(ring) {
            if (a.1 > y) != (b.1 > y) {
                xs.push(a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2).find(|s| s[1] > s[0]).map(|s| ((s[0] + s[1]) / 2.0, y))
}

fn validate_shapes(shapes: &BTreeMap<String, Vec<Polygon>>) -> Result<()> {
    struct Prepared<'a> {
        code: &'a str,
        polys: &'a [Polygon],
        bbox: BBox,
        probes: Vec<Point>,
    }
    let mut prepared = Vec::new();
    for (code, polys) in shapes {
        for p in polys {
            for ring in p.rings() {
                if !ring_is_simple(ring) {
                    return Err(Error::Gazetteer(format!("region {code} has a self-intersecting or degenerate ring")));
                }
            }
        }
        let mut probes: Vec<Point> = polys.iter().filter_map(interior_point).collect();
        probes.extend(polys.iter().flat_map(|p| p.exterior.iter().copied()));
        prepared.push(Prepared {
            code,
            polys,
            bbox: BBox::of(polys.iter().flat_map(|p| p.exterior.iter().copied())),
            probes,
        });
    }
    let edges_in = |polys: &[Polygon], bb: &BBox| -> Vec<(Point, Point)> {
        polys
            .iter()
            .flat_map(|p| p.rings().flat_map(ring_edges).collect::<Vec<_>>())
            .filter(|(a, b)| BBox::of([*a, *b].into_iter()).overlaps(bb))
            .collect()
    };
    for i in 0..prepared.len() {
        for j in i + 1..prepared.len() {
            let (a, b) = (&prepared[i], &prepared[j]);
            if !a.bbox.overlaps(&b.bbox) {
                continue;
            }
            let overlap = || -> bool {
                let probe_in = |from: &Prepared, into: &Prepared| {
                    from.probes
                        .iter()
                        .any(|p| into.bbox.contains(*p) && locate(into.polys, *p) == PointLocation::Inside)
                };
                if probe_in(a, b) || probe_in(b, a) {
                    return true;
                }
                let ea = edges_in(a.polys, &b.bbox);
                let eb = edges_in(b.polys, &a.bbox);
                ea.iter().any(|(p, q)| eb.iter().any(|(r, s)| proper_cross(*p, *q, *r, *s)))
            };
            if overlap() {
                return Err(Error::Gazetteer(format!("regions {} and {} overlap", a.code, b.code)));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Resolvers and cross-checking

pub trait Resolver: Send + Sync {
    fn name(&self) -> &str;
    fn vote(&self, user: &UserProfile, gaz: &Gazetteer) -> Option<Candidate>;
}

pub struct AliasSpecificFirst;
pub struct AliasGeneralFirst;
pub struct PolygonResolver;

impl Resolver for AliasSpecificFirst {
    fn name(&self) -> &str {
        "alias-specific"
    }
    fn vote(&self, user: &UserProfile, gaz: &Gazetteer) -> Option<Candidate> {
        resolve_location(&user.location_text, gaz)
    }
}

impl Resolver for AliasGeneralFirst {
    fn name(&self) -> &str {
        "alias-general"
    }
    fn vote(&self, user: &UserProfile, gaz: &Gazetteer) -> Option<Candidate> {
        resolve_location_general_first(&user.location_text, gaz)
    }
}

impl Resolver for PolygonResolver {
    fn name(&self) -> &str {
        "polygon"
    }
    fn vote(&self, user: &UserProfile, gaz: &Gazetteer) -> Option<Candidate> {
        let (lat, lon) = user.coordinates?;
        if !gaz.has_polygons() {
            return None;
        }
        assign_region(lat, lon, gaz).ok().flatten().map(Candidate::Region)
    }
}

pub fn default_resolvers() -> Vec<Box<dyn Resolver>> {
    alloc::vec![Box::new(AliasSpecificFirst), Box::new(AliasGeneralFirst), Box::new(PolygonResolver)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub resolver: String,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Resolved(RegionId),
    Unresolved,
    Conflict(Vec<RegionId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub author_id: String,
    pub outcome: Outcome,
    pub votes: Vec<Vote>,
}

impl Resolution {
    pub fn region(&self) -> Option<&RegionId> {
        match &self.outcome {
            Outcome::Resolved(r) => Some(r),
            _ => None,
        }
    }

    /// Some resolver placed the poster outside the study countries.
    pub fn is_vetoed(&self) -> bool {
        self.votes.iter().any(|v| matches!(v.candidate, Candidate::Foreign(_)))
    }

    /// Resolved although not every resolver agreed.
    pub fn has_dissent(&self) -> bool {
        match &self.outcome {
            Outcome::Resolved(r) => self.votes.iter().any(|v| v.candidate != Candidate::Region(r.clone())),
            _ => false,
        }
    }
}

/// Unanimous or strict-majority votes resolve; ties are conflicts; a foreign
/// vote vetoes. No votes at all leaves the poster unresolved.
pub fn cross_check(votes: &[Vote]) -> Outcome {
    if votes.is_empty() || votes.iter().any(|v| matches!(v.candidate, Candidate::Foreign(_))) {
        return Outcome::Unresolved;
    }
    let mut tally: BTreeMap<&RegionId, usize> = BTreeMap::new();
    for v in votes {
        if let Candidate::Region(r) = &v.candidate {
            *tally.entry(r).or_default() += 1;
        }
    }
    let (best, count) = tally.iter().max_by_key(|(_, c)| **c).map(|(r, c)| (*r, *c)).unwrap();
    if 2 * count > votes.len() {
        Outcome::Resolved(best.clone())
    } else {
        Outcome::Conflict(tally.keys().map(|r| (*r).clone()).collect())
    }
}

pub fn resolve_user(user: &UserProfile, gaz: &Gazetteer, resolvers: &[Box<dyn Resolver>]) -> Resolution {
    let votes: Vec<Vote> = resolvers
        .iter()
        .filter_map(|r| r.vote(user, gaz).map(|candidate| Vote { resolver: r.name().into(), candidate }))
        .collect();
    Resolution { author_id: user.author_id.clone(), outcome: cross_check(&votes), votes }
}
