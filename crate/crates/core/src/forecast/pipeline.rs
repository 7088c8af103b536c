//! End-to-end training and prediction pipelines for the four feature
//! regimes.
//!
//! A pipeline owns the fitted scaler, the trained model, and the exact
//! feature-assembly recipe. Prediction reuses the same assembly code path as
//! training, so feature rows for a given date are byte-identical in both.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{AlignedSeries, DISCHARGE_COL};
use crate::error::{Error, Result};
use crate::evaluation::{
    grid_search, r2, CvSplit, FitTask, FoldScore, GridAxis, MetricsReport, ParamAssignment,
    ParamGrid, ParamValue, TuneResult,
};
use crate::features::{
    fit_robust_scaler, inverse_transform, make_lag_features, make_windows, CenterMode, LagSpec,
    ScalerParams, SupervisedMatrix, WindowSpec,
};
use crate::models::gbt::{gbt_fit, GbtConfig, GbtModel};
use crate::models::neural::{fit as neural_fit, NeuralModel, NeuralSpec, TrainConfig};
use crate::models::svr::{svr_fit, SvrConfig, SvrModel};
use crate::models::ModelKind;

use super::alert::{classify_alert, AlertThresholds};

/// The four experimental feature regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Same-day climate only; no discharge-derived feature anywhere.
    ClimateOnly,
    /// Same-day climate plus lagged discharge (and optional climate lags).
    ClimatePlusLags,
    /// Recurrent models over a short window, one-day horizon.
    SequenceDaily,
    /// Recurrent models over a long window, multi-day horizon.
    SequenceMultistep,
}

impl Regime {
    pub fn default_window(self) -> WindowSpec {
        match self {
            Regime::SequenceMultistep => WindowSpec {
                window: 20,
                horizon: 5,
            },
            _ => WindowSpec {
                window: 5,
                horizon: 1,
            },
        }
    }

    pub fn is_sequence(self) -> bool {
        matches!(self, Regime::SequenceDaily | Regime::SequenceMultistep)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ClimateOnly => "climate_only",
            Regime::ClimatePlusLags => "climate_plus_lags",
            Regime::SequenceDaily => "sequence_daily",
            Regime::SequenceMultistep => "sequence_multistep",
        }
    }
}

/// Full recipe for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub regime: Regime,
    pub model: ModelKind,
    pub seed: u64,
    /// Discharge lags for the lagged regime (days).
    pub discharge_lags: Vec<usize>,
    /// Extra lagged climate columns, `(column, lags)`.
    pub climate_lags: Vec<(String, Vec<usize>)>,
    /// Window shape for the sequence regimes.
    pub window: WindowSpec,
    pub scaler_center: CenterMode,
    /// Whether sequence windows carry discharge as an input channel.
    pub include_discharge_channel: bool,
    /// Clamp negative raw predictions to 0 (flagged on the entry).
    pub clamp_negative: bool,
    pub svr: SvrConfig,
    pub gbt: GbtConfig,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Alert bands; derived from train quantiles when absent.
    pub alerts: Option<AlertThresholds>,
}

impl PipelineConfig {
    pub fn new(regime: Regime, model: ModelKind) -> Self {
        Self {
            regime,
            model,
            seed: 0,
            discharge_lags: vec![1, 2, 3, 4, 5],
            climate_lags: vec![("precip_mm".into(), vec![1])],
            window: regime.default_window(),
            scaler_center: CenterMode::Q1,
            include_discharge_channel: true,
            clamp_negative: true,
            svr: SvrConfig::default(),
            gbt: GbtConfig::default(),
            hidden: vec![32],
            train: TrainConfig::default(),
            alerts: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regime.is_sequence() && !self.model.is_recurrent() {
            return Err(Error::RegimeModelMismatch {
                regime: self.regime.as_str().into(),
                model: self.model.to_string(),
            });
        }
        if self.regime == Regime::SequenceDaily && self.window.horizon != 1 {
            return Err(Error::InvalidConfig(
                "sequence_daily predicts a single day (horizon 1)".into(),
            ));
        }
        if self.regime == Regime::SequenceMultistep && self.window.horizon < 2 {
            return Err(Error::InvalidConfig(
                "sequence_multistep needs a horizon of at least 2 days".into(),
            ));
        }
        if self.window.window == 0 || self.window.horizon == 0 {
            return Err(Error::InvalidConfig(
                "window and horizon must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable SHA-256 over the serialized config; keyed into checkpoints and
    /// reports for provenance.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }

    fn lag_specs(&self) -> Result<Vec<LagSpec>> {
        let mut specs = Vec::new();
        for (column, lags) in &self.climate_lags {
            specs.push(LagSpec::new(column.clone(), lags.clone())?);
        }
        if self.regime == Regime::ClimatePlusLags && !self.discharge_lags.is_empty() {
            specs.push(LagSpec::new(DISCHARGE_COL, self.discharge_lags.clone())?);
        }
        Ok(specs)
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Trained model parameters behind one enum for uniform dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum TrainedModel {
    Svr(SvrModel),
    Gbt(GbtModel),
    Neural(NeuralModel),
}

impl TrainedModel {
    /// Scaled-space prediction, one value per horizon step.
    pub fn predict_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Svr(m) => Ok(vec![m.predict(row)?]),
            TrainedModel::Gbt(m) => Ok(vec![m.predict(row)?]),
            TrainedModel::Neural(m) => m.predict_row(row),
        }
    }
}

/// Scaler + model + provenance; immutable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub fingerprint: String,
    pub scaler: ScalerParams,
    pub model: TrainedModel,
    pub feature_names: Vec<String>,
    /// Per-epoch training loss for neural fits; empty for classical models.
    pub loss_history: Vec<f64>,
    pub alerts: AlertThresholds,
}

/// One forecast entry: a single target date at one horizon step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    /// Date this prediction is for.
    pub date: NaiveDate,
    /// Horizon step index, 1-based.
    pub step: usize,
    pub predicted_cms: f64,
    pub actual_cms: Option<f64>,
    pub alert: String,
    /// True when a negative raw prediction was clamped to zero.
    pub clamped: bool,
    /// Hash of the input feature row; all steps of one forecast share it.
    pub window_fingerprint: String,
}

/// Assemble the supervised matrix for `config` from an already-scaled series.
pub fn assemble_features(
    config: &PipelineConfig,
    scaled: &AlignedSeries,
) -> Result<SupervisedMatrix> {
    let mut matrix = match config.regime {
        Regime::ClimateOnly => make_lag_features(scaled, &config.lag_specs()?, false)?,
        Regime::ClimatePlusLags => make_lag_features(scaled, &config.lag_specs()?, true)?,
        Regime::SequenceDaily | Regime::SequenceMultistep => {
            let mut columns: Vec<String> = scaled
                .columns
                .iter()
                .filter(|c| c.as_str() != DISCHARGE_COL)
                .cloned()
                .collect();
            if config.include_discharge_channel {
                columns.push(DISCHARGE_COL.into());
            }
            make_windows(scaled, config.window, &columns)?
        }
    };
    matrix.targets_scaled = true;
    Ok(matrix)
}

fn fit_model(
    config: &PipelineConfig,
    matrix: &SupervisedMatrix,
) -> Result<(TrainedModel, Vec<f64>)> {
    if matrix.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let targets_1d = || -> Vec<f64> { matrix.y.iter().map(|row| row[0]).collect() };
    match config.model {
        ModelKind::Svr => {
            let model = svr_fit(&matrix.x, &targets_1d(), &config.svr)?;
            Ok((TrainedModel::Svr(model), Vec::new()))
        }
        ModelKind::Gbt => {
            let mut gbt = config.gbt.clone();
            gbt.seed = config.seed;
            let model = gbt_fit(&matrix.x, &targets_1d(), &gbt)?;
            Ok((TrainedModel::Gbt(model), Vec::new()))
        }
        kind => {
            let spec = NeuralSpec::new(kind, config.hidden.clone())?;
            let mut train = config.train.clone();
            train.seed = config.seed;
            let (model, history) = neural_fit(&spec, matrix, &train)?;
            Ok((TrainedModel::Neural(model), history))
        }
    }
}

/// Fit the scaler on `train` only, build features per the regime, and train
/// the configured model.
pub fn train_pipeline(config: &PipelineConfig, train: &AlignedSeries) -> Result<TrainedPipeline> {
    config.validate()?;
    let scaler = fit_robust_scaler(train, &train.columns, config.scaler_center)?;
    let scaled = scaler.scale_series(train)?;
    let matrix = assemble_features(config, &scaled)?;
    let (model, loss_history) = fit_model(config, &matrix)?;
    let alerts = match &config.alerts {
        Some(a) => a.clone(),
        None => AlertThresholds::from_train_quantiles(scaler.column(DISCHARGE_COL)?),
    };
    Ok(TrainedPipeline {
        fingerprint: config.fingerprint(),
        config: config.clone(),
        scaler,
        model,
        feature_names: matrix.feature_names,
        loss_history,
        alerts,
    })
}

impl TrainedPipeline {
    fn discharge_scaler(&self) -> &crate::features::ColumnScaler {
        self.scaler
            .column(DISCHARGE_COL)
            .expect("trained pipeline always scales discharge")
    }

    /// Required history dates for a lag-regime forecast at `date`.
    fn required_dates(&self, date: NaiveDate) -> Result<Vec<NaiveDate>> {
        let mut dates = vec![date];
        for spec in self.config.lag_specs()? {
            for lag in spec.lags {
                dates.push(date - chrono::Duration::days(lag as i64));
            }
        }
        dates.sort_unstable();
        dates.dedup();
        Ok(dates)
    }

    /// Feature row for the forecast issued for `date`, assembled exactly as
    /// at training time.
    fn feature_row(&self, series: &AlignedSeries, date: NaiveDate) -> Result<Vec<f64>> {
        let scaled = self.scaler.scale_series(series)?;
        if self.config.regime.is_sequence() {
            // The window is the last `w` rows strictly before `date`, so a
            // date one past the series end is a legitimate forecast target.
            let idx = scaled.dates.partition_point(|d| *d < date);
            let w = self.config.window.window;
            if idx < w {
                let missing: Vec<NaiveDate> = (idx..w)
                    .map(|k| date - chrono::Duration::days((k + 1) as i64))
                    .collect();
                return Err(Error::MissingHistory { date, missing });
            }
            // Reuse the training assembly on the window slice plus target
            // rows so the bytes match training exactly.
            let lo = idx - w;
            let hi = (idx + self.config.window.horizon).min(scaled.len());
            let slice = AlignedSeries {
                dates: scaled.dates[lo..hi].to_vec(),
                columns: scaled.columns.clone(),
                rows: scaled.rows[lo..hi].to_vec(),
                gap_report: Vec::new(),
            };
            // When actual future rows are missing we only need the window
            // itself; build the sample inputs directly.
            if hi - lo < w + self.config.window.horizon {
                let mut columns: Vec<String> = scaled
                    .columns
                    .iter()
                    .filter(|c| c.as_str() != DISCHARGE_COL)
                    .cloned()
                    .collect();
                if self.config.include_discharge_channel {
                    columns.push(DISCHARGE_COL.into());
                }
                let col_ix: Vec<usize> = columns
                    .iter()
                    .map(|c| slice.column_index(c))
                    .collect::<Result<_>>()?;
                let mut row = Vec::with_capacity(w * col_ix.len());
                for j in 0..w {
                    for &c in &col_ix {
                        row.push(slice.rows[j][c]);
                    }
                }
                return Ok(row);
            }
            let matrix = assemble_features(&self.config, &slice)?;
            let pos = matrix
                .target_dates
                .iter()
                .position(|d| *d == date)
                .ok_or(Error::UnknownDate(date))?;
            return Ok(matrix.x[pos].clone());
        }

        let required = self.required_dates(date)?;
        let missing: Vec<NaiveDate> = required
            .iter()
            .copied()
            .filter(|d| scaled.date_index(*d).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingHistory { date, missing });
        }
        let matrix = assemble_features(&self.config, &scaled)?;
        let pos = matrix
            .target_dates
            .iter()
            .position(|d| *d == date)
            .ok_or(Error::UnknownDate(date))?;
        Ok(matrix.x[pos].clone())
    }

    fn entry_from_prediction(
        &self,
        date: NaiveDate,
        step: usize,
        scaled_prediction: f64,
        actual: Option<f64>,
        window_fingerprint: &str,
    ) -> Result<ForecastEntry> {
        let raw = inverse_transform(scaled_prediction, self.discharge_scaler())?;
        let (predicted_cms, clamped) = if raw < 0.0 && self.config.clamp_negative {
            (0.0, true)
        } else {
            (raw, false)
        };
        Ok(ForecastEntry {
            date,
            step,
            predicted_cms,
            actual_cms: actual,
            alert: classify_alert(predicted_cms, &self.alerts).to_string(),
            clamped,
            window_fingerprint: window_fingerprint.to_string(),
        })
    }

    /// One-day forecast for `date`.
    pub fn predict_daily(&self, series: &AlignedSeries, date: NaiveDate) -> Result<ForecastEntry> {
        let row = self.feature_row(series, date)?;
        let fp = row_fingerprint(&row);
        let out = self.model.predict_row(&row)?;
        let actual = series
            .date_index(date)
            .map(|i| series.rows[i][series.column_index(DISCHARGE_COL).unwrap()]);
        self.entry_from_prediction(date, 1, out[0], actual, &fp)
    }

    /// Multi-day forecast issued for `date` (step 1) through
    /// `date + horizon − 1`. All entries share the window fingerprint.
    pub fn predict_multistep(
        &self,
        series: &AlignedSeries,
        date: NaiveDate,
    ) -> Result<Vec<ForecastEntry>> {
        if !self.config.regime.is_sequence() {
            return Err(Error::InvalidConfig(
                "multistep prediction requires a sequence regime".into(),
            ));
        }
        let row = self.feature_row(series, date)?;
        let fp = row_fingerprint(&row);
        let out = self.model.predict_row(&row)?;
        let q_ix = series.column_index(DISCHARGE_COL)?;
        let mut entries = Vec::with_capacity(out.len());
        for (k, scaled_prediction) in out.iter().enumerate() {
            let target = date + chrono::Duration::days(k as i64);
            let actual = series.date_index(target).map(|i| series.rows[i][q_ix]);
            entries.push(self.entry_from_prediction(
                target,
                k + 1,
                *scaled_prediction,
                actual,
                &fp,
            )?);
        }
        Ok(entries)
    }

    /// Forecast every feasible target date in `series`.
    pub fn predict_series(&self, series: &AlignedSeries) -> Result<Vec<ForecastEntry>> {
        let scaled = self.scaler.scale_series(series)?;
        let matrix = assemble_features(&self.config, &scaled)?;
        let q_ix = series.column_index(DISCHARGE_COL)?;
        let window = match matrix.layout {
            crate::features::MatrixLayout::Windowed { window, .. } => Some(window),
            crate::features::MatrixLayout::Flat => None,
        };
        let mut entries = Vec::new();
        for (i, row) in matrix.x.iter().enumerate() {
            let fp = row_fingerprint(row);
            let out = self.model.predict_row(row)?;
            for (k, scaled_prediction) in out.iter().enumerate() {
                // Windowed sample i spans series rows i..i+window-1, so the
                // step-k target is row i+window+k exactly, gaps included.
                let (target, actual) = match window {
                    Some(w) => {
                        let row_ix = i + w + k;
                        (series.dates[row_ix], Some(series.rows[row_ix][q_ix]))
                    }
                    None => {
                        let date = matrix.target_dates[i];
                        (date, series.date_index(date).map(|r| series.rows[r][q_ix]))
                    }
                };
                entries.push(self.entry_from_prediction(
                    target,
                    k + 1,
                    *scaled_prediction,
                    actual,
                    &fp,
                )?);
            }
        }
        Ok(entries)
    }

    /// Metrics on a held-out series in raw m³/s, overall and per step.
    pub fn evaluate(&self, series: &AlignedSeries) -> Result<EvaluationReport> {
        let entries = self.predict_series(series)?;
        if entries.is_empty() {
            return Err(Error::EmptyResults);
        }
        let horizon = self.config.window.horizon;
        let mut per_step = Vec::new();
        for step in 1..=horizon {
            let (actual, predicted): (Vec<f64>, Vec<f64>) = entries
                .iter()
                .filter(|e| e.step == step && e.actual_cms.is_some())
                .map(|e| (e.actual_cms.unwrap(), e.predicted_cms))
                .unzip();
            if actual.is_empty() {
                continue;
            }
            per_step.push((step, MetricsReport::compute(&actual, &predicted)?));
        }
        let (actual, predicted): (Vec<f64>, Vec<f64>) = entries
            .iter()
            .filter(|e| e.actual_cms.is_some())
            .map(|e| (e.actual_cms.unwrap(), e.predicted_cms))
            .unzip();
        let overall = MetricsReport::compute(&actual, &predicted)?;
        Ok(EvaluationReport {
            overall,
            per_step,
            entries,
        })
    }
}

/// Evaluation outcome: pooled metrics, per-step metrics, and the raw entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub overall: MetricsReport,
    pub per_step: Vec<(usize, MetricsReport)>,
    pub entries: Vec<ForecastEntry>,
}

fn row_fingerprint(row: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in row {
        hasher.update(v.to_le_bytes());
    }
    hex_string(&hasher.finalize()[..8])
}

/// Default hyper-parameter grid per model family.
pub fn default_grid(kind: ModelKind) -> ParamGrid {
    let floats = |vals: &[f64]| vals.iter().copied().map(ParamValue::Float).collect();
    let ints = |vals: &[i64]| vals.iter().copied().map(ParamValue::Int).collect();
    let axes = match kind {
        ModelKind::Svr => vec![
            GridAxis {
                name: "c".into(),
                values: floats(&[0.1, 1.0, 10.0, 100.0]),
            },
            GridAxis {
                name: "gamma".into(),
                values: floats(&[1e-3, 1e-2, 1e-1, 1.0]),
            },
            GridAxis {
                name: "epsilon".into(),
                values: floats(&[0.005, 0.01, 0.05, 0.1, 0.2]),
            },
        ],
        ModelKind::Gbt => vec![
            GridAxis {
                name: "max_depth".into(),
                values: ints(&[3, 5, 7]),
            },
            GridAxis {
                name: "n_estimators".into(),
                values: ints(&[50, 100, 200]),
            },
            GridAxis {
                name: "learning_rate".into(),
                values: floats(&[0.05, 0.1, 0.2]),
            },
            GridAxis {
                name: "subsample".into(),
                values: floats(&[0.8, 1.0]),
            },
            GridAxis {
                name: "colsample".into(),
                values: floats(&[0.8, 1.0]),
            },
        ],
        _ => vec![
            GridAxis {
                name: "optimizer".into(),
                values: vec![
                    ParamValue::Text("sgd".into()),
                    ParamValue::Text("adam".into()),
                ],
            },
            GridAxis {
                name: "batch_size".into(),
                values: ints(&[10, 16, 32]),
            },
            GridAxis {
                name: "epochs".into(),
                values: ints(&[10, 16, 20]),
            },
        ],
    };
    ParamGrid { model: kind, axes }
}

/// Overlay one grid assignment onto a base config.
pub fn apply_assignment(
    base: &PipelineConfig,
    assignment: &ParamAssignment,
    seed: u64,
) -> Result<PipelineConfig> {
    let mut config = base.clone();
    config.seed = seed;
    for (name, value) in &assignment.values {
        let bad = || {
            Error::InvalidConfig(format!(
                "axis '{name}' = {value} not applicable to model '{}'",
                base.model
            ))
        };
        match (base.model, name.as_str()) {
            (ModelKind::Svr, "c") => config.svr.c = value.as_f64().ok_or_else(bad)?,
            (ModelKind::Svr, "gamma") => config.svr.gamma = value.as_f64().ok_or_else(bad)?,
            (ModelKind::Svr, "epsilon") => config.svr.epsilon = value.as_f64().ok_or_else(bad)?,
            (ModelKind::Svr, "tol") => config.svr.tol = value.as_f64().ok_or_else(bad)?,
            (ModelKind::Gbt, "max_depth") => {
                config.gbt.max_depth = value.as_usize().ok_or_else(bad)?
            }
            (ModelKind::Gbt, "n_estimators") => {
                config.gbt.n_estimators = value.as_usize().ok_or_else(bad)?
            }
            (ModelKind::Gbt, "learning_rate") => {
                config.gbt.learning_rate = value.as_f64().ok_or_else(bad)?
            }
            (ModelKind::Gbt, "subsample") => {
                config.gbt.subsample = value.as_f64().ok_or_else(bad)?
            }
            (ModelKind::Gbt, "colsample") => {
                config.gbt.colsample = value.as_f64().ok_or_else(bad)?
            }
            (ModelKind::Gbt, "lambda") => config.gbt.lambda = value.as_f64().ok_or_else(bad)?,
            (kind, "learning_rate") if kind.is_neural() => {
                config.train.learning_rate = value.as_f64().ok_or_else(bad)?
            }
            (kind, "batch_size") if kind.is_neural() => {
                config.train.batch_size = value.as_usize().ok_or_else(bad)?
            }
            (kind, "epochs") if kind.is_neural() => {
                config.train.epochs = value.as_usize().ok_or_else(bad)?
            }
            (kind, "hidden") if kind.is_neural() => {
                config.hidden = vec![value.as_usize().ok_or_else(bad)?]
            }
            (kind, "optimizer") if kind.is_neural() => {
                config.train.optimizer = match value.as_str().ok_or_else(bad)? {
                    "sgd" => crate::models::neural::OptimizerKind::Sgd,
                    "adam" => crate::models::neural::OptimizerKind::Adam,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
    }
    Ok(config)
}

/// Grid-search `grid` over `train` with the given splits; returns the full
/// table and the base config with the winning assignment applied.
pub fn tune_pipeline(
    base: &PipelineConfig,
    grid: &ParamGrid,
    train: &AlignedSeries,
    splits: &CvSplit,
) -> Result<(TuneResult, PipelineConfig)> {
    base.validate()?;
    if grid.model != base.model {
        return Err(Error::InvalidConfig(format!(
            "grid targets '{}' but the pipeline trains '{}'",
            grid.model, base.model
        )));
    }
    let scaler = fit_robust_scaler(train, &train.columns, base.scaler_center)?;
    let scaled = scaler.scale_series(train)?;
    let matrix = assemble_features(base, &scaled)?;
    let discharge = scaler.column(DISCHARGE_COL)?.clone();

    let result = grid_search(grid, &matrix, splits, base.seed, |task: &FitTask| {
        let config = apply_assignment(base, task.assignment, task.seed)?;
        let (model, _) = fit_model(&config, &task.train)?;
        let mut actual_scaled = Vec::new();
        let mut pred_scaled = Vec::new();
        for (row, target) in task.validation.x.iter().zip(&task.validation.y) {
            let out = model.predict_row(row)?;
            for (o, t) in out.iter().zip(target) {
                actual_scaled.push(*t);
                pred_scaled.push(*o);
            }
        }
        let r2_scaled = r2(&actual_scaled, &pred_scaled)?.unwrap_or(f64::NEG_INFINITY);
        let actual_raw: Vec<f64> = actual_scaled
            .iter()
            .map(|v| inverse_transform(*v, &discharge))
            .collect::<Result<_>>()?;
        let pred_raw: Vec<f64> = pred_scaled
            .iter()
            .map(|v| inverse_transform(*v, &discharge))
            .collect::<Result<_>>()?;
        let r2_raw = r2(&actual_raw, &pred_raw)?.unwrap_or(f64::NEG_INFINITY);
        Ok(FoldScore { r2_scaled, r2_raw })
    })?;

    let winner = apply_assignment(base, &result.best().assignment.clone(), base.seed)?;
    Ok((result, winner))
}
