use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("corrupt archive: {malformed} of {total} records malformed (threshold {threshold})")]
    CorruptArchive { malformed: u64, total: u64, threshold: f64 },

    #[error("empty window sample")]
    EmptyWindowSample,

    #[error("anderson-darling needs at least 4 pooled observations, got {0}")]
    SampleTooSmall(u64),

    #[error("empty season")]
    EmptySeason,

    #[error("degenerate regression")]
    DegenerateRegression,

    #[error("missing baseline seasons: {0:?}")]
    MissingBaselines(Vec<i32>),

    #[error("mismatched series: {0}")]
    MismatchedSeries(String),

    #[error("invalid gazetteer: {0}")]
    Gazetteer(String),

    #[error("choropleth requires boundary file")]
    NoBoundaries,

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid filter policy: {0}")]
    Policy(String),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
