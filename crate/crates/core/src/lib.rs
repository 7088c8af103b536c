//! River-discharge forecasting toolkit.
//!
//! The crate covers the full pipeline from raw gauging-station and climate
//! CSVs to multistep flood forecasts:
//!
//! - [`dataset`]: CSV ingestion, cleaning, date alignment, temporal split.
//! - [`features`]: robust (quartile) scaling, lag features, sliding windows.
//! - [`models`]: SVR, gradient-boosted trees, MLP, LSTM and GRU, all trained
//!   from scratch with seeded, reproducible optimizers.
//! - [`evaluation`]: MAE/MSE/RMSE/R², cross-validation splitters, grid search.
//! - [`forecast`]: end-to-end pipelines, alert classification, report files.
//! - [`synth`]: a seeded synthetic basin generator used as ground truth in
//!   tests and demos.
//!
//! All randomness flows through explicitly seeded ChaCha8 generators, so any
//! run is reproducible from its configuration and seed alone.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forecast;
pub mod models;
pub mod synth;

pub use error::{Error, Result};
