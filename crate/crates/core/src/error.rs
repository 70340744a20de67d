use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the validation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("record {id}: missing field `{field}`")]
    MissingField { id: String, field: String },

    #[error("record {id}: field `{field}` is invalid: {reason}")]
    InvalidField {
        id: String,
        field: String,
        reason: String,
    },

    #[error("record {id}: field `{field}` holds an invalid bbox {coords:?} ({reason})")]
    InvalidBBox {
        id: String,
        field: String,
        coords: [i64; 4],
        reason: &'static str,
    },

    #[error("record {id}: field `{field}` box {coords:?} exceeds page {width}x{height}")]
    OutOfPageBounds {
        id: String,
        field: String,
        coords: [i64; 4],
        width: u32,
        height: u32,
    },

    #[error("record {id}: region index {index} appears more than once")]
    DuplicateRegionIndex { id: String, index: u32 },

    #[error("bad split ratios: {0}")]
    BadRatios(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("ground-truth answer list is empty")]
    EmptyGroundTruth,

    #[error("{name} = {value} lies outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("prediction id {prediction} does not match example id {example}")]
    IdMismatch { example: String, prediction: String },

    #[error("prediction {id} has no matching example")]
    OrphanPrediction { id: String },

    #[error("id {id} appears more than once")]
    DuplicateId { id: String },

    #[error("cannot place {regions} disjoint regions on a {width}x{height} page")]
    InfeasibleLayout {
        regions: usize,
        width: u32,
        height: u32,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("student adapter failed: {0}")]
    Adapter(String),

    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_line(self, line: usize) -> Self {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
