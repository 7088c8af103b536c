//! Crate-wide error type.

use chrono::NaiveDate;
use std::path::PathBuf;

/// Errors produced by any stage of the forecasting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- dataset ---
    #[error("file not found: {path}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("column '{column}' absent from header of {path}")]
    SchemaColumnMissing { column: String, path: PathBuf },
    #[error("zero parseable rows in {path}")]
    ZeroParseableRows { path: PathBuf },
    #[error("empty intersection of date ranges between climate and discharge inputs")]
    EmptyIntersection,
    #[error("series of {rows} rows is too small to split with train fraction {fraction}")]
    SplitTooSmall { rows: usize, fraction: f64 },
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidTrainFraction(f64),

    // --- features ---
    #[error("column '{0}' not present in series")]
    UnknownColumn(String),
    #[error("column '{0}' has no finite values to fit a scaler on")]
    EmptyColumn(String),
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },
    #[error("lag {lag} does not resolve within a series of {len} rows")]
    LagTooLarge { lag: usize, len: usize },
    #[error("series of {len} rows is shorter than window {window} + horizon {horizon}")]
    SeriesTooShort {
        len: usize,
        window: usize,
        horizon: usize,
    },
    #[error("invalid lag spec for '{column}': {reason}")]
    InvalidLagSpec { column: String, reason: String },

    // --- models ---
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite training loss at epoch {epoch}: training diverged")]
    Diverged { epoch: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyTrainingSet,

    // --- evaluation ---
    #[error("length mismatch: {left} actual vs {right} predicted values")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric input is empty")]
    EmptyMetricInput,
    #[error("k-fold requires 2 <= k <= n, got k = {k}, n = {n}")]
    InvalidFolds { k: usize, n: usize },
    #[error("forward-chain split infeasible: min_train {min_train} + k {k} > n {n}")]
    InfeasibleChain {
        min_train: usize,
        k: usize,
        n: usize,
    },
    #[error("every grid configuration failed to fit; see attached table")]
    AllConfigsFailed(Box<crate::evaluation::TuneResult>),
    #[error("parameter grid is empty")]
    EmptyGrid,

    // --- forecast ---
    #[error("history rows missing for forecast at {date}: {missing:?}")]
    MissingHistory {
        date: NaiveDate,
        missing: Vec<NaiveDate>,
    },
    #[error("date {0} not present in series")]
    UnknownDate(NaiveDate),
    #[error("model '{model}' not allowed in regime '{regime}'")]
    RegimeModelMismatch { regime: String, model: String },
    #[error("checkpoint version {found} does not match supported version {expected}")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("no results to report")]
    EmptyResults,
    #[error("alert thresholds invalid: {0}")]
    InvalidThresholds(String),

    // --- synth ---
    #[error("invalid basin parameters: {0}")]
    InvalidBasinParams(String),

    // --- io / serialization ---
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
