//! Statistical core for detecting seasonal excesses of symptom mentions in
//! social-media message streams.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. Parsing of
//! archive files, configuration, report formatting and the command line live
//! in the `earlywarn` companion crate.
//!
//! The pipeline stages map onto modules:
//!
//! * [`ingest`]: validation and deduplication of parsed archive records.
//! * [`filters`]: URL, follower-count and keyword noise filters.
//! * [`geo`]: gazetteer lookup, point-in-polygon assignment and resolver
//!   cross-checking.
//! * [`timeseries`]: daily series, season-aligned slices and cumulative curves.
//! * [`stats`]: two-sample Kolmogorov–Smirnov and Anderson–Darling tests,
//!   the moving-window scan, anomaly segments, relative variation and the
//!   log-log regression.
//! * [`synth`]: the deterministic synthetic corpus generator.
//! * [`report`]: region tables derived from the statistics.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod filters;
pub mod geo;
pub mod ingest;
pub mod lang;
pub mod report;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
pub use lang::{Country, Language};
