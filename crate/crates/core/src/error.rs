use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("point configuration has {config} atoms but the family has {family}")]
    DimensionMismatch { config: usize, family: usize },
    #[error("at least two replications are required, got {0}")]
    TooFewReplications(usize),
    #[error("index {index} out of range for a family of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure has {got} weights but the index set has {expected} points")]
    WrongLength { expected: usize, got: usize },
    #[error("weight {index} is negative or not finite: {value}")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("mixture coefficients must be nonnegative and sum to 1")]
    BadMixture,
}

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("greedy packing at level {level} produced {centers} centers, limit is {limit}")]
    CoverFailure {
        level: usize,
        centers: usize,
        limit: u64,
    },
    #[error("invalid partition tree: {0}")]
    InvalidTree(String),
    #[error("exhaustive gamma is limited to {cap} points, got {got}")]
    SizeCap { cap: usize, got: usize },
    #[error("index set is empty")]
    Empty,
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate estimate: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}
