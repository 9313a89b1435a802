use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: malformed record: {msg}")]
    MalformedRecord {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("label out of range: label {label} >= {num_classes} classes ({context})")]
    LabelOutOfRange {
        label: u32,
        num_classes: usize,
        context: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("duplicate sample id: {0}")]
    DuplicateId(String),

    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("eigenvalues not sorted descending and non-negative: {0:?}")]
    UnsortedEigenvalues([f64; 3]),

    #[error("requested {requested} clusters but the graph has only {available} nodes")]
    TooManyClusters { requested: usize, available: usize },

    #[error("graph has {components} connected components, more than the {requested} requested clusters")]
    TooManyComponents { components: usize, requested: usize },

    #[error("empty member set")]
    EmptyMembers,

    #[error("labeled subset is empty")]
    NoLabels,

    #[error("feature dimension mismatch: model expects {expected}, input provides {got}")]
    FeatureDimMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("unit {0} is already labeled")]
    AlreadyLabeled(String),

    #[error("no unlabeled units remain")]
    EmptyPool,

    #[error("budget exceeded: spending {cost} clicks with {remaining} remaining")]
    BudgetExceeded { cost: usize, remaining: usize },

    #[error("budget of {budget} clicks is smaller than the cheapest unit ({min_cost} clicks)")]
    BudgetTooSmall { budget: usize, min_cost: usize },

    #[error("unknown granularity: {0}")]
    UnknownGranularity(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset has no test split")]
    MissingTestSplit,

    #[error("test-split labels were read {0} times before evaluation")]
    TestLabelAccess(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
