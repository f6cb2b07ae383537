//! File formats, configuration, report emission and pipeline orchestration
//! around [`earlywarn_core`].

pub mod archive;
pub mod config;
pub mod error;
pub mod gazetteer;
pub mod output;
pub mod pipeline;
pub mod scenario;
pub mod series_io;

pub use error::{Error, Result};
