//! Line-delimited JSON archives.
//!
//! Each line is one object. Field names follow [`Schema`], whose defaults
//! are `id`, `user_id`, `created_at`, `text`, `lang`, `keyword_set`,
//! `followers_count`, `friends_count`, `statuses_count`, `location`, `lat`
//! and `lon`. A schema entry may be a dotted path (`user.id`) into nested
//! objects. Blank lines are ignored; lines that are not JSON objects count as
//! malformed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use earlywarn_core::filters::keyword_match;
use earlywarn_core::ingest::{validate_record, Archive, ArchiveBuilder, DateRange, RawRecord, Rejection, ValidRecord};
use earlywarn_core::synth::SynthLine;
use earlywarn_core::Language;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub id: String,
    pub user_id: String,
    pub created_at: String,
    pub text: String,
    pub lang: String,
    pub keyword_set: String,
    pub followers_count: String,
    pub friends_count: String,
    pub statuses_count: String,
    pub location: String,
    pub lat: String,
    pub lon: String,
    /// Used when a record has no keyword set and none can be inferred.
    pub default_keyword_set: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "id".into(),
            user_id: "user_id".into(),
            created_at: "created_at".into(),
            text: "text".into(),
            lang: "lang".into(),
            keyword_set: "keyword_set".into(),
            followers_count: "followers_count".into(),
            friends_count: "friends_count".into(),
            statuses_count: "statuses_count".into(),
            location: "location".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            default_keyword_set: None,
        }
    }
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|source| Error::Toml { path: path.into(), source })
    }
}

/// Keyword lists per set and language, used to tag records that arrive
/// without a keyword set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordSets(pub BTreeMap<String, BTreeMap<Language, Vec<String>>>);

impl KeywordSets {
    /// First set, in name order, with a keyword in the text.
    pub fn infer(&self, text: &str, lang: Language) -> Option<&str> {
        self.0
            .iter()
            .find(|(_, per_lang)| per_lang.get(&lang).is_some_and(|ks| !ks.is_empty() && keyword_match(text, ks, true)))
            .map(|(name, _)| name.as_str())
    }
}

fn lookup<'a>(obj: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(obj, |v, key| v.get(key)).filter(|v| !v.is_null())
}

fn as_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn as_u64(v: Option<&Value>) -> Option<u64> {
    match v? {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_f64(v: Option<&Value>) -> Option<f64> {
    match v? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineOutcome {
    Blank,
    Malformed,
    Parsed(RawRecord),
}

pub fn parse_line(line: &str, schema: &Schema) -> LineOutcome {
    if line.trim().is_empty() {
        return LineOutcome::Blank;
    }
    let Ok(obj @ Value::Object(_)) = serde_json::from_str::<Value>(line) else {
        return LineOutcome::Malformed;
    };
    let f = |p: &str| lookup(&obj, p);
    LineOutcome::Parsed(RawRecord {
        id: as_string(f(&schema.id)),
        user_id: as_string(f(&schema.user_id)),
        created_at: as_string(f(&schema.created_at)),
        text: as_string(f(&schema.text)),
        lang: as_string(f(&schema.lang)),
        keyword_set: as_string(f(&schema.keyword_set)),
        followers_count: as_u64(f(&schema.followers_count)),
        friends_count: as_u64(f(&schema.friends_count)),
        statuses_count: as_u64(f(&schema.statuses_count)),
        location: as_string(f(&schema.location)),
        lat: as_f64(f(&schema.lat)),
        lon: as_f64(f(&schema.lon)),
    })
}

/// A stream of archive lines. Files are the only shipped source.
pub trait RecordSource: Send + Sync {
    fn name(&self) -> String;
    fn lines(&self) -> Result<Box<dyn Iterator<Item = Result<String>> + '_>>;
}

pub struct FileSource(pub PathBuf);

impl RecordSource for FileSource {
    fn name(&self) -> String {
        self.0.display().to_string()
    }

    fn lines(&self) -> Result<Box<dyn Iterator<Item = Result<String>> + '_>> {
        let file = File::open(&self.0).map_err(|e| Error::io(&self.0, e))?;
        let path = self.0.clone();
        Ok(Box::new(BufReader::new(file).lines().map(move |l| l.map_err(|e| Error::io(&path, e)))))
    }
}

pub struct ReadOptions<'a> {
    pub schema: &'a Schema,
    pub range: DateRange,
    pub keyword_sets: Option<&'a KeywordSets>,
    pub corrupt_threshold: f64,
}

type Validated = std::result::Result<ValidRecord, Rejection>;

fn read_source(src: &dyn RecordSource, opts: &ReadOptions<'_>) -> Result<Vec<Validated>> {
    let mut out = Vec::new();
    for line in src.lines()? {
        match parse_line(&line?, opts.schema) {
            LineOutcome::Blank => {}
            LineOutcome::Malformed => out.push(Err(Rejection::Syntax)),
            LineOutcome::Parsed(mut raw) => {
                if raw.keyword_set.is_none() {
                    let inferred = match (
                        opts.keyword_sets,
                        raw.text.as_deref(),
                        raw.lang.as_deref().and_then(Language::from_code),
                    ) {
                        (Some(sets), Some(text), Some(lang)) => sets.infer(text, lang).map(String::from),
                        _ => None,
                    };
                    raw.keyword_set = inferred.or_else(|| opts.schema.default_keyword_set.clone());
                }
                out.push(validate_record(&raw, &opts.range));
            }
        }
    }
    Ok(out)
}

/// Parses shards in parallel and merges them in the given order, so the
/// first occurrence of a duplicate is the same for any thread count.
pub fn read_archives(sources: &[Box<dyn RecordSource>], opts: &ReadOptions<'_>) -> Result<Archive> {
    let shards: Vec<Vec<Validated>> =
        sources.par_iter().map(|s| read_source(s.as_ref(), opts)).collect::<Result<_>>()?;
    let mut builder = ArchiveBuilder::new(opts.range);
    for v in shards.into_iter().flatten() {
        builder.push_validated(v);
    }
    Ok(builder.finish(opts.corrupt_threshold)?)
}

pub fn read_archive_files(paths: &[PathBuf], opts: &ReadOptions<'_>) -> Result<Archive> {
    let sources: Vec<Box<dyn RecordSource>> =
        paths.iter().map(|p| Box::new(FileSource(p.clone())) as Box<dyn RecordSource>).collect();
    read_archives(&sources, opts)
}

/// One JSON object per line, absent optional fields omitted.
pub fn record_to_line(r: &RawRecord) -> String {
    let mut v = serde_json::to_value(r).expect("record serializes");
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v.to_string()
}

pub fn write_archive(path: &Path, lines: &[SynthLine]) -> Result<()> {
    let mut w = create(path)?;
    for l in lines {
        let s = match l {
            SynthLine::Record(r) => record_to_line(r),
            SynthLine::Malformed(s) => s.clone(),
        };
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|source| Error::Json { path: path.into(), source })?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|source| Error::Json { path: path.into(), source })?);
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json { path: path.into(), source })?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}
