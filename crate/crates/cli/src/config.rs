//! The run-configuration file: a TOML document validated strictly (unknown
//! keys are rejected) before any work starts. Command-line `--set key=value`
//! overrides are applied to the parsed TOML tree first, so precedence is
//! flag > file > default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use hydrocast::features::{CenterMode, WindowSpec};
use hydrocast::forecast::{AlertThresholds, PipelineConfig, Regime};
use hydrocast::models::gbt::GbtConfig;
use hydrocast::models::neural::{InitScheme, OptimizerKind, TrainConfig};
use hydrocast::models::svr::SvrConfig;
use hydrocast::models::ModelKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub pipeline: PipelineSection,
    pub svr: SvrSection,
    pub gbt: GbtSection,
    pub neural: NeuralSection,
    pub tune: TuneSection,
    pub alerts: Option<AlertsSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            pipeline: PipelineSection::default(),
            svr: SvrSection::default(),
            gbt: GbtSection::default(),
            neural: NeuralSection::default(),
            tune: TuneSection::default(),
            alerts: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Fused series written by `ingest` (or any CSV in the same schema).
    pub aligned: Option<PathBuf>,
    /// Raw inputs, used when `aligned` is absent.
    pub climate: Vec<PathBuf>,
    pub discharge: Option<PathBuf>,
    pub average_stations: bool,
    pub extra_columns: Vec<String>,
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            aligned: None,
            climate: Vec::new(),
            discharge: None,
            average_stations: true,
            extra_columns: Vec::new(),
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub regime: String,
    pub model: String,
    pub discharge_lags: Vec<usize>,
    /// Lagged climate columns: `{ precip_mm = [1] }`.
    pub climate_lags: toml::value::Table,
    pub window: usize,
    pub horizon: usize,
    pub scaler_center: String,
    pub include_discharge_channel: bool,
    pub clamp_negative: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            regime: "climate_plus_lags".into(),
            model: "svr".into(),
            discharge_lags: vec![1, 2, 3, 4, 5],
            climate_lags: {
                let mut t = toml::value::Table::new();
                t.insert(
                    "precip_mm".into(),
                    toml::Value::Array(vec![toml::Value::Integer(1)]),
                );
                t
            },
            window: 0, // 0 = regime default
            horizon: 0,
            scaler_center: "q1".into(),
            include_discharge_channel: true,
            clamp_negative: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvrSection {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrSection {
    fn default() -> Self {
        let d = SvrConfig::default();
        Self {
            c: d.c,
            gamma: d.gamma,
            epsilon: d.epsilon,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtSection {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma_split: f64,
    pub subsample: f64,
    pub colsample: f64,
}

impl Default for GbtSection {
    fn default() -> Self {
        let d = GbtConfig::default();
        Self {
            n_estimators: d.n_estimators,
            max_depth: d.max_depth,
            learning_rate: d.learning_rate,
            lambda: d.lambda,
            gamma_split: d.gamma_split,
            subsample: d.subsample,
            colsample: d.colsample,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralSection {
    pub hidden: Vec<usize>,
    pub optimizer: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub gradient_clip_norm: f64,
    /// `glorot_uniform` or `glorot_uniform_strict` (no forget-bias offset).
    pub init_scheme: String,
}

impl Default for NeuralSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            hidden: vec![32],
            optimizer: "adam".into(),
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            gradient_clip_norm: d.gradient_clip_norm,
            init_scheme: "glorot_uniform".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    /// `kfold` or `forward_chain`.
    pub cv: String,
    pub folds: usize,
    pub shuffle: bool,
    /// Forward-chain minimum training rows; 0 means half the data.
    pub min_train: usize,
    /// Axes: `{ c = [0.1, 1.0], gamma = [0.001] }`; empty means the
    /// model family's default grid.
    pub grid: toml::value::Table,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            cv: "kfold".into(),
            folds: 5,
            shuffle: true,
            min_train: 0,
            grid: toml::value::Table::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertsSection {
    /// `[["normal", 0.0], ["watch", 500.0], ...]`
    pub levels: Vec<(String, f64)>,
}

impl RunConfig {
    /// Load from TOML, apply `--set` overrides, and validate strictly.
    pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut value: toml::Value = text
            .parse()
            .with_context(|| format!("config file {} is not valid TOML", path.display()))?;
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let config: RunConfig = value
            .try_into()
            .context("config failed schema validation")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(0.0 < self.data.train_fraction && self.data.train_fraction < 1.0) {
            bail!(
                "data.train_fraction must lie in (0, 1), got {}",
                self.data.train_fraction
            );
        }
        self.model()?;
        self.regime()?;
        self.pipeline_config()?;
        Ok(())
    }

    pub fn model(&self) -> anyhow::Result<ModelKind> {
        self.pipeline
            .model
            .parse()
            .map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn regime(&self) -> anyhow::Result<Regime> {
        Ok(match self.pipeline.regime.as_str() {
            "climate_only" => Regime::ClimateOnly,
            "climate_plus_lags" => Regime::ClimatePlusLags,
            "sequence_daily" => Regime::SequenceDaily,
            "sequence_multistep" => Regime::SequenceMultistep,
            other => bail!("unknown regime '{other}'"),
        })
    }

    /// Materialize the core [`PipelineConfig`], validating regime/model
    /// compatibility before any data is touched.
    pub fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let regime = self.regime()?;
        let model = self.model()?;
        let mut config = PipelineConfig::new(regime, model);
        config.seed = self.seed;
        config.discharge_lags = self.pipeline.discharge_lags.clone();
        config.climate_lags = parse_climate_lags(&self.pipeline.climate_lags)?;
        let default_window = regime.default_window();
        config.window = WindowSpec {
            window: if self.pipeline.window == 0 {
                default_window.window
            } else {
                self.pipeline.window
            },
            horizon: if self.pipeline.horizon == 0 {
                default_window.horizon
            } else {
                self.pipeline.horizon
            },
        };
        config.scaler_center = match self.pipeline.scaler_center.as_str() {
            "q1" => CenterMode::Q1,
            "median" => CenterMode::Median,
            other => bail!("unknown scaler_center '{other}' (expected q1 or median)"),
        };
        config.include_discharge_channel = self.pipeline.include_discharge_channel;
        config.clamp_negative = self.pipeline.clamp_negative;
        config.svr = SvrConfig {
            c: self.svr.c,
            gamma: self.svr.gamma,
            epsilon: self.svr.epsilon,
            tol: self.svr.tol,
            max_iter: self.svr.max_iter,
        };
        config.gbt = GbtConfig {
            n_estimators: self.gbt.n_estimators,
            max_depth: self.gbt.max_depth,
            learning_rate: self.gbt.learning_rate,
            lambda: self.gbt.lambda,
            gamma_split: self.gbt.gamma_split,
            subsample: self.gbt.subsample,
            colsample: self.gbt.colsample,
            seed: self.seed,
        };
        config.hidden = self.neural.hidden.clone();
        config.train = TrainConfig {
            optimizer: match self.neural.optimizer.as_str() {
                "sgd" => OptimizerKind::Sgd,
                "adam" => OptimizerKind::Adam,
                other => bail!("unknown optimizer '{other}' (expected sgd or adam)"),
            },
            learning_rate: self.neural.learning_rate,
            batch_size: self.neural.batch_size,
            epochs: self.neural.epochs,
            seed: self.seed,
            gradient_clip_norm: self.neural.gradient_clip_norm,
            init_scheme: match self.neural.init_scheme.as_str() {
                "glorot_uniform" => InitScheme::GlorotUniform,
                "glorot_uniform_strict" => InitScheme::GlorotUniformStrict,
                other => bail!("unknown init_scheme '{other}'"),
            },
        };
        config.alerts = match &self.alerts {
            Some(section) => Some(
                AlertThresholds::new(section.levels.clone()).map_err(|e| anyhow::anyhow!("{e}"))?,
            ),
            None => None,
        };
        config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(config)
    }
}

fn parse_climate_lags(table: &toml::value::Table) -> anyhow::Result<Vec<(String, Vec<usize>)>> {
    let mut out = Vec::new();
    for (column, value) in table {
        let arr = value
            .as_array()
            .with_context(|| format!("climate_lags.{column} must be an array of day offsets"))?;
        let lags: Vec<usize> = arr
            .iter()
            .map(|v| {
                v.as_integer()
                    .filter(|n| *n > 0)
                    .map(|n| n as usize)
                    .with_context(|| format!("climate_lags.{column} entries must be positive"))
            })
            .collect::<anyhow::Result<_>>()?;
        out.push((column.clone(), lags));
    }
    Ok(out)
}

/// Apply one `path.to.key=value` override onto the TOML tree. The value is
/// parsed as a TOML literal, falling back to a string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> anyhow::Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override '{spec}' is not of the form key=value"))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("v").unwrap(),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .with_context(|| format!("override '{spec}': '{part}' is not a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::value::Table::new()));
    }
    unreachable!("override paths are nonempty")
}
