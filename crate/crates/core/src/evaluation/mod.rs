//! Metrics, cross-validation splitters, and grid search.

mod grid;
mod metrics;
mod splits;

pub use grid::{
    derive_seed, grid_search, FitTask, FoldScore, GridAxis, ParamAssignment, ParamGrid, ParamValue,
    TuneResult, TuneRow,
};
pub use metrics::{mae, mse, r2, rmse, MetricsReport};
pub use splits::{forward_chain_splits, kfold_splits, CvSplit};
