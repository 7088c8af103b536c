//! Regression metrics: MAE, MSE, RMSE and R².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric bundle for one evaluation run. Errors are in the units of the
/// inputs (m³/s when computed on inverse-transformed predictions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the actuals are constant (SS_tot = 0): R² is undefined.
    pub r2: Option<f64>,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        Ok(Self {
            mae: mae(actual, predicted)?,
            mse: mse(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            r2: r2(actual, predicted)?,
            n: actual.len(),
        })
    }
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    if actual
        .iter()
        .chain(predicted.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            context: "metric input".into(),
        });
    }
    Ok(())
}

/// Mean absolute error, `(1/n) Σ |y - ŷ|`.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).abs())
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Mean squared error, `(1/n) Σ (y - ŷ)²`.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Root mean squared error, `sqrt(mse)`.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    Ok(mse(actual, predicted)?.sqrt())
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
///
/// Returns `Ok(None)` when the actuals are constant, where the score is
/// undefined rather than zero or infinite.
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Ok(None);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    let ss_tot: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - ss_res / ss_tot))
}
