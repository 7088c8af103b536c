//! Regression model families: SVR, gradient-boosted trees, and the three
//! neural architectures (MLP, LSTM, GRU).

pub mod gbt;
pub mod neural;
pub mod svr;

use serde::{Deserialize, Serialize};
use std::fmt;

/// The five model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svr,
    Gbt,
    Mlp,
    Lstm,
    Gru,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Svr,
        ModelKind::Gbt,
        ModelKind::Mlp,
        ModelKind::Lstm,
        ModelKind::Gru,
    ];

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Mlp | ModelKind::Lstm | ModelKind::Gru)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Gru)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Svr => "svr",
            ModelKind::Gbt => "gbt",
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svr" => Ok(ModelKind::Svr),
            "gbt" => Ok(ModelKind::Gbt),
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            "gru" => Ok(ModelKind::Gru),
            other => Err(crate::Error::InvalidConfig(format!(
                "unknown model kind '{other}'"
            ))),
        }
    }
}
