//! Synthetic scenarios on disk.
//!
//! A scenario file is TOML mirroring [`ScenarioSpec`]. Generation writes
//! `archive.jsonl` in the ingest format and `truth.json`, the ground-truth
//! manifest with totals, per-cell counts and the planted surges.

use std::path::{Path, PathBuf};

use earlywarn_core::synth::{assemble, generate_day, GroundTruth, ScenarioSpec, SynthLine};
use rayon::prelude::*;

use crate::archive::{write_archive, write_json};
use crate::error::{Error, Result};

pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const TRUTH_FILE: &str = "truth.json";

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: ScenarioSpec = toml::from_str(&text).map_err(|source| Error::Toml { path: path.into(), source })?;
    spec.validate()?;
    Ok(spec)
}

/// Same output as the sequential generator; days are independent streams.
pub fn generate(spec: &ScenarioSpec) -> Result<(Vec<SynthLine>, GroundTruth)> {
    spec.validate()?;
    let dates: Vec<_> = spec.days().collect();
    let days = dates.par_iter().map(|d| generate_day(spec, *d)).collect();
    Ok(assemble(spec, days))
}

pub struct Written {
    pub archive: PathBuf,
    pub truth: PathBuf,
    pub ground_truth: GroundTruth,
}

pub fn write_scenario(spec: &ScenarioSpec, out: &Path) -> Result<Written> {
    let (lines, truth) = generate(spec)?;
    let archive = out.join(ARCHIVE_FILE);
    let truth_path = out.join(TRUTH_FILE);
    write_archive(&archive, &lines)?;
    write_json(&truth_path, &truth)?;
    Ok(Written { archive, truth: truth_path, ground_truth: truth })
}
