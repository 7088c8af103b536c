//! Discharge alert levels with closed lower bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ColumnScaler;

/// One named level active from `lower_bound` (inclusive) upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertLevel {
    pub name: String,
    /// m³/s.
    pub lower_bound: f64,
}

/// Ordered alert bands. Bounds are strictly increasing and start at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertThresholds {
    pub levels: Vec<AlertLevel>,
}

impl AlertThresholds {
    pub fn new(levels: Vec<(String, f64)>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidThresholds("no levels given".into()));
        }
        if levels[0].1 != 0.0 {
            return Err(Error::InvalidThresholds(
                "first lower bound must be 0".into(),
            ));
        }
        for pair in levels.windows(2) {
            if pair[1].1 <= pair[0].1 {
                return Err(Error::InvalidThresholds(format!(
                    "bounds must strictly increase: {} then {}",
                    pair[0].1, pair[1].1
                )));
            }
        }
        Ok(Self {
            levels: levels
                .into_iter()
                .map(|(name, lower_bound)| AlertLevel { name, lower_bound })
                .collect(),
        })
    }

    /// Data-driven defaults from the training-discharge quartiles:
    /// watch at Q3, warning at the Q3 + 1.5·IQR outlier fence, severe at
    /// Q3 + 3·IQR.
    pub fn from_train_quantiles(discharge: &ColumnScaler) -> Self {
        let q3 = discharge.q3;
        let iqr = discharge.iqr;
        Self {
            levels: vec![
                AlertLevel {
                    name: "normal".into(),
                    lower_bound: 0.0,
                },
                AlertLevel {
                    name: "watch".into(),
                    lower_bound: q3,
                },
                AlertLevel {
                    name: "warning".into(),
                    lower_bound: q3 + 1.5 * iqr,
                },
                AlertLevel {
                    name: "severe".into(),
                    lower_bound: q3 + 3.0 * iqr,
                },
            ],
        }
    }
}

/// Highest level whose lower bound does not exceed `discharge`.
pub fn classify_alert(discharge: f64, thresholds: &AlertThresholds) -> &str {
    let mut current = thresholds.levels[0].name.as_str();
    for level in &thresholds.levels {
        if discharge >= level.lower_bound {
            current = level.name.as_str();
        }
    }
    current
}
