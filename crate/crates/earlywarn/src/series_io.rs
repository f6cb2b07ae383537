//! Daily series as delimited text.
//!
//! A file holds a `#` header block with the series key and start date, then
//! `date,count` rows for consecutive days. Files live at
//! `<root>/<keyword_set>/<scope>/<count_mode>.csv`.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use earlywarn_core::timeseries::{DailySeries, SeriesKey};

use crate::archive::create;
use crate::error::{Error, Result};

pub fn series_path(root: &Path, key: &SeriesKey) -> PathBuf {
    root.join(&key.keyword_set).join(key.scope.to_string()).join(format!("{}.csv", key.mode.as_str()))
}

pub fn write_series(root: &Path, series: &DailySeries) -> Result<PathBuf> {
    let path = series_path(root, &series.key);
    let mut w = create(&path)?;
    let mut body = format!(
        "# keyword_set={}\n# scope={}\n# count_mode={}\n# start={}\ndate,count\n",
        series.key.keyword_set,
        series.key.scope,
        series.key.mode.as_str(),
        series.start
    );
    for (d, v) in series.dates().zip(&series.values) {
        body.push_str(&format!("{d},{v}\n"));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_series(path: &Path) -> Result<DailySeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format(path, m);
    let (mut set, mut scope, mut mode, mut start) = (None, None, None, None);
    let mut lines = text.lines();
    for line in lines.by_ref() {
        let Some(h) = line.strip_prefix('#') else {
            if line != "date,count" {
                return Err(bad(format!("expected column header, got {line:?}")));
            }
            break;
        };
        let (k, v) = h.trim().split_once('=').ok_or_else(|| bad(format!("bad header line {line:?}")))?;
        match k {
            "keyword_set" => set = Some(v.to_string()),
            "scope" => scope = Some(v.parse().map_err(|e| bad(format!("{e}")))?),
            "count_mode" => mode = Some(v.parse().map_err(|e| bad(format!("{e}")))?),
            "start" => start = Some(v.parse::<NaiveDate>().map_err(|e| bad(format!("{e}")))?),
            _ => return Err(bad(format!("unknown header key {k:?}"))),
        }
    }
    let key = match (set, scope, mode) {
        (Some(keyword_set), Some(scope), Some(mode)) => SeriesKey { scope, keyword_set, mode },
        _ => return Err(bad("incomplete header".into())),
    };
    let start = start.ok_or_else(|| bad("missing start".into()))?;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let (d, v) = line.split_once(',').ok_or_else(|| bad(format!("bad row {line:?}")))?;
        let d: NaiveDate = d.parse().map_err(|e| bad(format!("{e}")))?;
        if Some(d) != start.checked_add_days(chrono::Days::new(i as u64)) {
            return Err(bad(format!("row {} is dated {d}; days must be consecutive from {start}", i + 1)));
        }
        values.push(v.trim().parse().map_err(|e| bad(format!("{e}")))?);
    }
    Ok(DailySeries { key, start, values })
}

/// Every series under `root`, in path order.
pub fn read_series_dir(root: &Path) -> Result<Vec<DailySeries>> {
    let mut files = Vec::new();
    collect_csv(root, &mut files)?;
    files.sort();
    files.iter().map(|p| read_series(p)).collect()
}

fn collect_csv(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_csv(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    Ok(())
}
