//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error("line {line}: duplicate image_id '{image_id}'")]
    DuplicateImageId { line: usize, image_id: String },

    #[error("line {line}: label {label} outside {{0,1}}")]
    InvalidLabel { line: usize, label: i64 },

    #[error("image '{image_id}': inverted bbox [{x1}, {y1}, {x2}, {y2}]")]
    InvertedBbox {
        image_id: String,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },

    #[error("image '{image_id}': score {score} outside [0,1]")]
    InvalidScore { image_id: String, score: f64 },

    #[error("image '{image_id}': detection with empty category")]
    EmptyCategory { image_id: String },

    #[error("dataset is missing label class {label}: need at least 2 records of each label")]
    MissingLabelClass { label: u8 },

    #[error("search_scale {0} outside (0,1)")]
    InvalidSearchScale(f64),

    #[error("cannot generate expressions over an empty feature schema")]
    EmptySchema,

    #[error("parse error at position {position}: {msg}")]
    Parse { position: usize, msg: String },

    #[error("type error at {path}: {msg}")]
    Type { path: String, msg: String },

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("unknown features in rule: {}", .0.join(", "))]
    UnknownFeatures(Vec<String>),

    #[error("split has a single label class; loss is undefined")]
    SingleClassSplit,

    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },

    #[error("planted rule unsatisfiable within {attempts} sampling attempts (record {record})")]
    UnsatisfiableRule { record: usize, attempts: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("rule file {path} contains no expression")]
    EmptyRuleFile { path: String },
}
