//! Feature-space reconstruction for tabular datasets.
//!
//! The library rebuilds a dataset's feature space by repeatedly crossing
//! groups of features with arithmetic operations. Three cascading Q-learning
//! agents pick what to cross: the first selects a feature group, the second an
//! operation, the third a second group. Generated columns are scored by a
//! random-forest evaluator under fixed cross-validation folds, rewards flow
//! back into the agents, and an information-theoretic selection step keeps the
//! working set bounded. Every generated column carries an expression tree, so
//! any feature can be re-derived from the original data alone.
//!
//! The pieces, bottom up:
//!
//! * [`data`] loads CSV tables and builds stratified cross-validation folds.
//! * [`expr`] defines the 14 operations and the expression language of
//!   generated features, including the provenance format.
//! * [`info`] holds the mutual-information estimator and the utility and
//!   distance measures built on it.
//! * [`cluster`] groups features by relevance-vs-redundancy distance.
//! * [`staterep`] turns feature sets and operations into fixed-length state
//!   vectors for the agents.
//! * [`rl`] implements the Q-networks, replay buffers, and the three agents.
//! * [`generate`] crosses two groups into candidate columns and controls the
//!   size of the working set.
//! * [`downstream`] is the random-forest evaluator behind the reward signal.
//! * [`engine`] ties everything into the training loop and its report.
//!
//! All randomness flows from one master seed through [`seeding::derive_seed`],
//! so a complete run is reproducible from a single integer.

pub mod cluster;
pub mod data;
pub mod downstream;
pub mod engine;
pub mod expr;
pub mod generate;
pub mod info;
pub mod parallel;
pub mod rl;
pub mod seeding;
pub mod staterep;

use std::path::PathBuf;

/// Crate-wide error type.
///
/// `Internal` marks a broken invariant (a bug, not bad input); everything else
/// is a usage or data problem the caller can act on.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("target column `{0}` not found in header")]
    MissingTarget(String),
    #[error("non-numeric cell at line {line}, column `{column}`: `{value}`")]
    NonNumericCell {
        line: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at line {line}, column `{column}`")]
    NonFiniteCell { line: usize, column: String },
    #[error("line {line} has {got} fields, header has {expected}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("need at least 2 feature columns besides the target, found {0}")]
    TooFewFeatures(usize),
    #[error("invalid classification target: {0}")]
    InvalidTarget(String),
    #[error("{n_folds} folds requested but only {n_rows} rows available")]
    FoldCount { n_folds: usize, n_rows: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("stop threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("relative absolute error undefined: target is constant")]
    ConstantTarget,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
