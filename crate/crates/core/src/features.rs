//! Robust scaling and supervised-matrix construction.
//!
//! Scaling is `(x - Q1) / IQR` with quartiles from linear-interpolation
//! (type-7) quantiles. Centering at Q1 maps the interquartile band to
//! `[0, 1]`; a `Median` centering mode offers the conventional variant.
//! Columns with `IQR < 1e-12` fall back to dividing by 1 and are flagged.

use serde::{Deserialize, Serialize};

use crate::dataset::{AlignedSeries, DISCHARGE_COL};
use crate::error::{Error, Result};

/// IQR below this threshold triggers the divide-by-one fallback.
pub const IQR_EPSILON: f64 = 1e-12;

/// Which statistic the scaler subtracts before dividing by the IQR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Subtract Q1 (the default).
    #[default]
    Q1,
    /// Subtract the median, the conventional robust-scaling center.
    Median,
}

/// Fitted scaling statistics for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub name: String,
    pub q1: f64,
    pub q3: f64,
    /// `q3 - q1`, always >= 0.
    pub iqr: f64,
    /// Value subtracted by [`transform`]: Q1 or the median per [`CenterMode`].
    pub center: f64,
    /// Set when `iqr < IQR_EPSILON`; the divisor is then 1.
    pub fallback: bool,
}

impl ColumnScaler {
    fn divisor(&self) -> f64 {
        if self.fallback {
            1.0
        } else {
            self.iqr
        }
    }
}

/// Per-column quartile statistics for a whole series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScaler>,
    pub center_mode: CenterMode,
}

impl ScalerParams {
    pub fn column(&self, name: &str) -> Result<&ColumnScaler> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Apply [`transform`] to every named column of `series`, leaving other
    /// columns untouched.
    pub fn scale_series(&self, series: &AlignedSeries) -> Result<AlignedSeries> {
        let mut out = series.clone();
        for col in &self.columns {
            let idx = series.column_index(&col.name)?;
            for row in &mut out.rows {
                row[idx] = transform(row[idx], col)?;
            }
        }
        Ok(out)
    }
}

/// Linear-interpolation (type-7) quantile of already-sorted values.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fit quartile statistics for the named columns on `series` rows only.
///
/// Call this on training rows; refitting on train+test moves the quartiles
/// and is detectable (see the leak-detector test).
pub fn fit_robust_scaler(
    series: &AlignedSeries,
    columns: &[String],
    center_mode: CenterMode,
) -> Result<ScalerParams> {
    let mut out = Vec::with_capacity(columns.len());
    for name in columns {
        let values = series.column(name)?;
        let mut finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::EmptyColumn(name.clone()));
        }
        finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_sorted(&finite, 0.25);
        let q3 = quantile_sorted(&finite, 0.75);
        let iqr = q3 - q1;
        let center = match center_mode {
            CenterMode::Q1 => q1,
            CenterMode::Median => quantile_sorted(&finite, 0.5),
        };
        out.push(ColumnScaler {
            name: name.clone(),
            q1,
            q3,
            iqr,
            center,
            fallback: iqr < IQR_EPSILON,
        });
    }
    Ok(ScalerParams {
        columns: out,
        center_mode,
    })
}

/// `(x - center) / IQR`, or `(x - center) / 1` on the fallback path.
pub fn transform(value: f64, col: &ColumnScaler) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: format!("transform input for column '{}'", col.name),
        });
    }
    Ok((value - col.center) / col.divisor())
}

/// Exact algebraic inverse of [`transform`].
pub fn inverse_transform(scaled: f64, col: &ColumnScaler) -> Result<f64> {
    if !scaled.is_finite() {
        return Err(Error::NonFinite {
            context: format!("inverse_transform input for column '{}'", col.name),
        });
    }
    Ok(scaled * col.divisor() + col.center)
}

/// Lagged copies of one column: `lags` are positive day offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSpec {
    pub column: String,
    pub lags: Vec<usize>,
}

impl LagSpec {
    pub fn new(column: impl Into<String>, lags: Vec<usize>) -> Result<Self> {
        let column = column.into();
        if lags.is_empty() {
            return Err(Error::InvalidLagSpec {
                column,
                reason: "lag list is empty".into(),
            });
        }
        if lags.contains(&0) {
            return Err(Error::InvalidLagSpec {
                column,
                reason: "lags must be strictly positive".into(),
            });
        }
        let mut seen = lags.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != lags.len() {
            return Err(Error::InvalidLagSpec {
                column,
                reason: "lags must be distinct".into(),
            });
        }
        Ok(Self { column, lags })
    }
}

/// Sliding-window shape: `window` input days, `horizon` target days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window: usize,
    pub horizon: usize,
}

impl WindowSpec {
    pub fn new(window: usize, horizon: usize) -> Result<Self> {
        if window == 0 || horizon == 0 {
            return Err(Error::InvalidConfig(
                "window and horizon must both be >= 1".into(),
            ));
        }
        Ok(Self { window, horizon })
    }
}

/// How rows of a [`SupervisedMatrix`] are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixLayout {
    /// One flat feature vector per sample.
    Flat,
    /// Each row is `window` consecutive day-slices of `step_width` features,
    /// oldest slice first.
    Windowed { window: usize, step_width: usize },
}

/// Feature rows and targets ready for model fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedMatrix {
    /// `x[i]` is the feature row for sample `i`.
    pub x: Vec<Vec<f64>>,
    /// `y[i]` holds one value per horizon step.
    pub y: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    /// Date of the first target step of each sample; strictly increasing.
    pub target_dates: Vec<chrono::NaiveDate>,
    pub layout: MatrixLayout,
    /// Whether `y` is in scaled units (true) or raw m³/s (false).
    pub targets_scaled: bool,
}

impl SupervisedMatrix {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn horizon(&self) -> usize {
        self.y.first().map_or(1, Vec::len)
    }

    /// Row subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> SupervisedMatrix {
        SupervisedMatrix {
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            target_dates: indices.iter().map(|&i| self.target_dates[i]).collect(),
            layout: self.layout,
            targets_scaled: self.targets_scaled,
        }
    }
}

/// Build one feature row per date `t` where every lag resolves.
///
/// Features are the same-day values of every non-discharge column plus the
/// requested lagged columns; the target is discharge at `t`. Lags resolve by
/// calendar date: lag `k` needs a row exactly `k` days before `t`. When
/// `include_target_lags` is false every discharge-derived feature is dropped,
/// leaving climate-only rows.
pub fn make_lag_features(
    series: &AlignedSeries,
    lag_specs: &[LagSpec],
    include_target_lags: bool,
) -> Result<SupervisedMatrix> {
    let n = series.len();
    let max_lag = lag_specs
        .iter()
        .flat_map(|s| s.lags.iter().copied())
        .max()
        .unwrap_or(0);
    if max_lag >= n {
        return Err(Error::LagTooLarge {
            lag: max_lag,
            len: n,
        });
    }
    let discharge_ix = series.column_index(DISCHARGE_COL)?;

    let specs: Vec<&LagSpec> = lag_specs
        .iter()
        .filter(|s| include_target_lags || s.column != DISCHARGE_COL)
        .collect();
    for spec in &specs {
        series.column_index(&spec.column)?;
    }

    let mut feature_names: Vec<String> = series
        .columns
        .iter()
        .filter(|c| c.as_str() != DISCHARGE_COL)
        .cloned()
        .collect();
    for spec in &specs {
        for lag in &spec.lags {
            feature_names.push(format!("{}_lag{}", spec.column, lag));
        }
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut target_dates = Vec::new();
    for t in 0..n {
        let date = series.dates[t];
        let mut row: Vec<f64> = series.rows[t]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != discharge_ix)
            .map(|(_, v)| *v)
            .collect();
        let mut complete = true;
        for spec in &specs {
            let col_ix = series.column_index(&spec.column)?;
            for &lag in &spec.lags {
                let want = date - chrono::Duration::days(lag as i64);
                match series.date_index(want) {
                    Some(i) => row.push(series.rows[i][col_ix]),
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if !complete {
                break;
            }
        }
        if !complete {
            continue;
        }
        x.push(row);
        y.push(vec![series.rows[t][discharge_ix]]);
        target_dates.push(date);
    }
    Ok(SupervisedMatrix {
        x,
        y,
        feature_names,
        target_dates,
        layout: MatrixLayout::Flat,
        targets_scaled: false,
    })
}

/// Build sliding-window samples: inputs are rows `i..i+window-1` over the
/// given feature columns, targets are discharge at rows
/// `i+window..i+window+horizon-1`. Sample count is `N - window - horizon + 1`.
pub fn make_windows(
    series: &AlignedSeries,
    spec: WindowSpec,
    feature_columns: &[String],
) -> Result<SupervisedMatrix> {
    let n = series.len();
    let (w, h) = (spec.window, spec.horizon);
    if n < w + h {
        return Err(Error::SeriesTooShort {
            len: n,
            window: w,
            horizon: h,
        });
    }
    let col_ix: Vec<usize> = feature_columns
        .iter()
        .map(|c| series.column_index(c))
        .collect::<Result<_>>()?;
    let discharge_ix = series.column_index(DISCHARGE_COL)?;

    // Step-major names: the slice `window - j` days before the first target.
    let mut feature_names = Vec::with_capacity(w * col_ix.len());
    for j in 0..w {
        for c in feature_columns {
            feature_names.push(format!("{}_lag{}", c, w - j));
        }
    }

    let count = n - w - h + 1;
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    let mut target_dates = Vec::with_capacity(count);
    for i in 0..count {
        let mut row = Vec::with_capacity(w * col_ix.len());
        for j in 0..w {
            for &c in &col_ix {
                row.push(series.rows[i + j][c]);
            }
        }
        x.push(row);
        y.push(
            (0..h)
                .map(|k| series.rows[i + w + k][discharge_ix])
                .collect(),
        );
        target_dates.push(series.dates[i + w]);
    }
    Ok(SupervisedMatrix {
        x,
        y,
        feature_names,
        target_dates,
        layout: MatrixLayout::Windowed {
            window: w,
            step_width: col_ix.len(),
        },
        targets_scaled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn series_from(discharge: &[f64]) -> AlignedSeries {
        let start = date("2005-01-01");
        AlignedSeries {
            dates: (0..discharge.len())
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect(),
            columns: vec!["precip_mm".into(), DISCHARGE_COL.into()],
            rows: discharge
                .iter()
                .enumerate()
                .map(|(i, &q)| vec![i as f64 * 0.5, q])
                .collect(),
            gap_report: vec![],
        }
    }

    fn scaler_for(values: &[f64]) -> ColumnScaler {
        let series = series_from(values);
        fit_robust_scaler(&series, &[DISCHARGE_COL.into()], CenterMode::Q1)
            .unwrap()
            .columns[0]
            .clone()
    }

    #[test]
    fn quartiles_linear_interpolation() {
        // Oracle: type-7 quantile at p=0.25, 0.75 on [0,25,50,75,100]:
        // position p*(n-1) = 1 and 3 exactly.
        let col = scaler_for(&[0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(col.q1, 25.0);
        assert_eq!(col.q3, 75.0);
        assert_eq!(col.iqr, 50.0);
        assert!(!col.fallback);
    }

    #[test]
    fn constant_column_falls_back() {
        let col = scaler_for(&[5.0, 5.0, 5.0]);
        assert_eq!(col.iqr, 0.0);
        assert!(col.fallback);
        assert_eq!(transform(7.0, &col).unwrap(), 2.0);
    }

    #[test]
    fn single_value_column() {
        let col = scaler_for(&[7.0]);
        assert_eq!(col.q1, 7.0);
        assert_eq!(col.q3, 7.0);
        assert!(col.fallback);
    }

    #[test]
    fn transform_maps_quartiles_to_unit() {
        let col = scaler_for(&[3.0, 10.0, 20.0, 55.0, 100.0, 2.0, 8.0]);
        assert_eq!(transform(col.q1, &col).unwrap(), 0.0);
        assert_eq!(transform(col.q3, &col).unwrap(), 1.0);
    }

    #[test]
    fn median_center_mode() {
        let series = series_from(&[0.0, 25.0, 50.0, 75.0, 100.0]);
        let params =
            fit_robust_scaler(&series, &[DISCHARGE_COL.into()], CenterMode::Median).unwrap();
        let col = &params.columns[0];
        assert_eq!(col.center, 50.0);
        assert_eq!(transform(50.0, col).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let col = scaler_for(&[1.0, 2.0, 3.0]);
        assert!(transform(f64::NAN, &col).is_err());
        assert!(inverse_transform(f64::INFINITY, &col).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_monotonicity(values in proptest::collection::vec(-1e6f64..1e6, 4..40),
                                       probe in -1e6f64..1e6, delta in 1e-3f64..1e3) {
            let col = scaler_for(&values);
            let s = transform(probe, &col).unwrap();
            let back = inverse_transform(s, &col).unwrap();
            prop_assert!((back - probe).abs() <= 1e-9 * probe.abs().max(1.0));
            if !col.fallback {
                let s2 = transform(probe + delta, &col).unwrap();
                prop_assert!(s2 > s);
            }
        }
    }

    #[test]
    fn leak_detector_refit_changes_params() {
        let all = series_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 900.0, 1000.0]);
        let (train, _) = crate::dataset::temporal_split(&all, 0.8).unwrap();
        let fit_train = fit_robust_scaler(&train, &[DISCHARGE_COL.into()], CenterMode::Q1).unwrap();
        let fit_all = fit_robust_scaler(&all, &[DISCHARGE_COL.into()], CenterMode::Q1).unwrap();
        assert_ne!(fit_train.columns[0].q3, fit_all.columns[0].q3);
    }

    #[test]
    fn lag_features_five_lags() {
        let series = series_from(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0]);
        let spec = LagSpec::new(DISCHARGE_COL, vec![1, 2, 3, 4, 5]).unwrap();
        let m = make_lag_features(&series, &[spec], true).unwrap();
        assert_eq!(m.len(), 1);
        // row = [same-day precip, lag1..lag5]
        assert_eq!(&m.x[0][1..], &[50.0, 40.0, 30.0, 20.0, 10.0]);
        assert_eq!(m.y[0], vec![60.0]);
        assert_eq!(m.target_dates[0], date("2005-01-06"));
    }

    #[test]
    fn lag_features_single_lag() {
        let series = series_from(&[10.0, 20.0]);
        let spec = LagSpec::new(DISCHARGE_COL, vec![1]).unwrap();
        let m = make_lag_features(&series, &[spec], true).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.x[0][1], 10.0);
        assert_eq!(m.y[0], vec![20.0]);
    }

    #[test]
    fn lag_exceeding_series_errors() {
        let series = series_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let spec = LagSpec::new(DISCHARGE_COL, vec![7]).unwrap();
        assert!(matches!(
            make_lag_features(&series, &[spec], true),
            Err(Error::LagTooLarge { lag: 7, len: 6 })
        ));
    }

    #[test]
    fn climate_only_strips_discharge_features() {
        let series = series_from(&[10.0, 20.0, 30.0]);
        let spec = LagSpec::new(DISCHARGE_COL, vec![1]).unwrap();
        let m = make_lag_features(&series, &[spec], false).unwrap();
        assert!(m
            .feature_names
            .iter()
            .all(|n| !n.starts_with(DISCHARGE_COL)));
    }

    #[test]
    fn window_counts() {
        let s25 = series_from(&(0..25).map(f64::from).collect::<Vec<_>>());
        let m = make_windows(&s25, WindowSpec::new(20, 5).unwrap(), &["precip_mm".into()]).unwrap();
        assert_eq!(m.len(), 1);

        let s7 = series_from(&(0..7).map(f64::from).collect::<Vec<_>>());
        let m = make_windows(&s7, WindowSpec::new(5, 1).unwrap(), &["precip_mm".into()]).unwrap();
        assert_eq!(m.len(), 2);

        let s24 = series_from(&(0..24).map(f64::from).collect::<Vec<_>>());
        assert!(
            make_windows(&s24, WindowSpec::new(20, 5).unwrap(), &["precip_mm".into()]).is_err()
        );
    }

    #[test]
    fn window_targets_follow_window() {
        let series = series_from(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
        let m = make_windows(
            &series,
            WindowSpec::new(3, 2).unwrap(),
            &[DISCHARGE_COL.into()],
        )
        .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.x[0], vec![10.0, 20.0, 30.0]);
        assert_eq!(m.y[0], vec![40.0, 50.0]);
        assert_eq!(m.x[2], vec![30.0, 40.0, 50.0]);
        assert_eq!(m.y[2], vec![60.0, 70.0]);
        assert_eq!(m.target_dates[0], date("2005-01-04"));
    }

    proptest! {
        #[test]
        fn windowing_loses_no_values(n in 6usize..24, w in 1usize..4, h in 1usize..3) {
            prop_assume!(n >= w + h);
            let values: Vec<f64> = (0..n).map(|i| i as f64 * 3.25).collect();
            let series = series_from(&values);
            let cols = vec!["precip_mm".to_string(), DISCHARGE_COL.to_string()];
            let m = make_windows(&series, WindowSpec { window: w, horizon: h }, &cols).unwrap();
            prop_assert_eq!(m.len(), n - w - h + 1);
            for (i, row) in m.x.iter().enumerate() {
                for j in 0..w {
                    for (c, col) in cols.iter().enumerate() {
                        let got = row[j * cols.len() + c];
                        let expect = series.rows[i + j][series.column_index(col).unwrap()];
                        prop_assert_eq!(got, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn lag_specs_validated() {
        assert!(LagSpec::new("q", vec![]).is_err());
        assert!(LagSpec::new("q", vec![0]).is_err());
        assert!(LagSpec::new("q", vec![1, 1]).is_err());
        assert!(LagSpec::new("q", vec![1, 2, 5]).is_ok());
    }
}
