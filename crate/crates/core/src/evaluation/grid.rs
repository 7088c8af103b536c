//! Exhaustive grid search over named hyper-parameter axes.
//!
//! Every combination is fitted on every fold (`|grid| × k` fits). Cells may
//! be evaluated concurrently; determinism comes from deriving each fit's RNG
//! seed from `(global seed, config index, fold index)` and keying results by
//! index rather than completion order.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::CvSplit;
use crate::features::SupervisedMatrix;
use crate::models::ModelKind;

/// One grid axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Text(v) => write!(f, "{v}"),
        }
    }
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Some(*v as usize),
            ParamValue::Float(v) if *v >= 0.0 && v.fract() == 0.0 => Some(*v as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(v) => Some(v),
            _ => None,
        }
    }
}

/// A named axis with a finite list of candidate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

/// The full search space for one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub model: ModelKind,
    pub axes: Vec<GridAxis>,
}

impl ParamGrid {
    /// Product of axis lengths.
    pub fn combination_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Materialize combination `index`, last axis varying fastest.
    pub fn assignment(&self, index: usize) -> ParamAssignment {
        let mut values = Vec::with_capacity(self.axes.len());
        let mut rem = index;
        for axis in self.axes.iter().rev() {
            let k = axis.values.len();
            values.push((axis.name.clone(), axis.values[rem % k].clone()));
            rem /= k;
        }
        values.reverse();
        ParamAssignment { values }
    }
}

/// One concrete point of the grid, in axis declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAssignment {
    pub values: Vec<(String, ParamValue)>,
}

impl ParamAssignment {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn usize(&self, name: &str) -> Option<usize> {
        self.get(name).and_then(ParamValue::as_usize)
    }

    pub fn str(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_str)
    }
}

/// Everything a fit callback needs for one `(config, fold)` cell.
pub struct FitTask<'a> {
    pub model: ModelKind,
    pub assignment: &'a ParamAssignment,
    pub config_index: usize,
    pub fold_index: usize,
    /// Seed derived from `(global seed, config index, fold index)`.
    pub seed: u64,
    pub train: SupervisedMatrix,
    pub validation: SupervisedMatrix,
}

/// Validation score of one cell: R² on scaled targets (the selection metric)
/// and on inverse-transformed targets (the reporting metric). For affine
/// scalers the two agree up to rounding; both are kept in the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub r2_scaled: f64,
    pub r2_raw: f64,
}

/// One table row: a configuration with its per-fold scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub config_index: usize,
    pub assignment: ParamAssignment,
    pub fold_scores: Vec<Option<FoldScore>>,
    /// Mean scaled-target R²; `None` when any fold failed.
    pub mean_score: Option<f64>,
    pub mean_score_raw: Option<f64>,
    /// First fit error, when any fold failed.
    pub error: Option<String>,
}

/// Full grid-search outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub model: ModelKind,
    /// Index into `rows` of the winning configuration.
    pub best_index: usize,
    pub best_mean_score: f64,
    pub rows: Vec<TuneRow>,
}

impl TuneResult {
    pub fn best(&self) -> &TuneRow {
        &self.rows[self.best_index]
    }

    /// CSV with one column per axis, one per fold, then the means.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let axes: Vec<&str> = self
            .rows
            .first()
            .map(|r| {
                r.assignment
                    .values
                    .iter()
                    .map(|(n, _)| n.as_str())
                    .collect()
            })
            .unwrap_or_default();
        let k = self.rows.first().map_or(0, |r| r.fold_scores.len());
        let mut header: Vec<String> = axes.iter().map(|s| s.to_string()).collect();
        header.extend((0..k).map(|j| format!("fold{j}_r2")));
        header.push("mean_r2".into());
        header.push("mean_r2_raw".into());
        header.push("best".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = row
                .assignment
                .values
                .iter()
                .map(|(_, v)| v.to_string())
                .collect();
            for s in &row.fold_scores {
                cells.push(match s {
                    Some(fs) => format!("{}", fs.r2_scaled),
                    None => "failed".into(),
                });
            }
            cells.push(row.mean_score.map_or("failed".into(), |v| v.to_string()));
            cells.push(
                row.mean_score_raw
                    .map_or("failed".into(), |v| v.to_string()),
            );
            cells.push(if row.config_index == self.best().config_index {
                "*".into()
            } else {
                String::new()
            });
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Short human-readable summary of the winner.
    pub fn summary_string(&self) -> String {
        let best = self.best();
        let params: Vec<String> = best
            .assignment
            .values
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!(
            "{} best config #{}: {} (mean validation R2 = {:.6}, {} configs evaluated)",
            self.model,
            best.config_index,
            params.join(", "),
            self.best_mean_score,
            self.rows.len()
        )
    }
}

/// Stable seed mix for one `(config, fold)` cell (splitmix64 over the parts).
pub fn derive_seed(global: u64, config_index: usize, fold_index: usize) -> u64 {
    let mut z = global
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(config_index as u64)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9)
        .wrapping_add(fold_index as u64);
    z ^= z >> 30;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run the full grid: fit every combination on every fold via `eval`,
/// select the configuration with the highest mean validation R² (scaled),
/// breaking ties by the lowest config index.
pub fn grid_search<F>(
    grid: &ParamGrid,
    data: &SupervisedMatrix,
    splits: &CvSplit,
    seed: u64,
    eval: F,
) -> Result<TuneResult>
where
    F: Fn(&FitTask) -> Result<FoldScore> + Sync,
{
    if grid.axes.is_empty() || grid.combination_count() == 0 {
        return Err(Error::EmptyGrid);
    }
    let n_configs = grid.combination_count();
    let k = splits.k();

    let cells: Vec<(usize, usize)> = (0..n_configs)
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let assignments: Vec<ParamAssignment> = (0..n_configs).map(|i| grid.assignment(i)).collect();

    let results: Vec<((usize, usize), std::result::Result<FoldScore, String>)> = cells
        .par_iter()
        .map(|&(c, f)| {
            let (train_ix, val_ix) = &splits.folds[f];
            let task = FitTask {
                model: grid.model,
                assignment: &assignments[c],
                config_index: c,
                fold_index: f,
                seed: derive_seed(seed, c, f),
                train: data.select(train_ix),
                validation: data.select(val_ix),
            };
            ((c, f), eval(&task).map_err(|e| e.to_string()))
        })
        .collect();

    let mut rows: Vec<TuneRow> = assignments
        .into_iter()
        .enumerate()
        .map(|(i, assignment)| TuneRow {
            config_index: i,
            assignment,
            fold_scores: vec![None; k],
            mean_score: None,
            mean_score_raw: None,
            error: None,
        })
        .collect();
    for ((c, f), outcome) in results {
        match outcome {
            Ok(score) => rows[c].fold_scores[f] = Some(score),
            Err(msg) => {
                if rows[c].error.is_none() {
                    rows[c].error = Some(msg);
                }
            }
        }
    }
    for row in &mut rows {
        if row.fold_scores.iter().all(Option::is_some) {
            let scaled: f64 = row.fold_scores.iter().flatten().map(|s| s.r2_scaled).sum();
            let raw: f64 = row.fold_scores.iter().flatten().map(|s| s.r2_raw).sum();
            if scaled.is_finite() {
                row.mean_score = Some(scaled / k as f64);
                row.mean_score_raw = Some(raw / k as f64);
            } else {
                row.error.get_or_insert_with(|| "non-finite score".into());
            }
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for row in &rows {
        if let Some(mean) = row.mean_score {
            let better = match best {
                None => true,
                Some((_, b)) => mean > b, // strict: ties keep the earlier index
            };
            if better {
                best = Some((row.config_index, mean));
            }
        }
    }
    match best {
        Some((best_index, best_mean_score)) => Ok(TuneResult {
            model: grid.model,
            best_index,
            best_mean_score,
            rows,
        }),
        None => Err(Error::AllConfigsFailed(Box::new(TuneResult {
            model: grid.model,
            best_index: 0,
            best_mean_score: f64::NEG_INFINITY,
            rows,
        }))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::kfold_splits;
    use crate::features::MatrixLayout;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn toy_matrix(n: usize) -> SupervisedMatrix {
        let start = chrono::NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
        SupervisedMatrix {
            x: (0..n).map(|i| vec![i as f64]).collect(),
            y: (0..n).map(|i| vec![2.0 * i as f64]).collect(),
            feature_names: vec!["f0".into()],
            target_dates: (0..n)
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect(),
            layout: MatrixLayout::Flat,
            targets_scaled: true,
        }
    }

    fn one_axis_grid(values: Vec<ParamValue>) -> ParamGrid {
        ParamGrid {
            model: ModelKind::Svr,
            axes: vec![GridAxis {
                name: "c".into(),
                values,
            }],
        }
    }

    #[test]
    fn single_config_grid() {
        let grid = one_axis_grid(vec![ParamValue::Float(1.0)]);
        let data = toy_matrix(10);
        let splits = kfold_splits(10, 5, 0, false).unwrap();
        let result = grid_search(&grid, &data, &splits, 0, |_| {
            Ok(FoldScore {
                r2_scaled: 0.5,
                r2_raw: 0.5,
            })
        })
        .unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.best_index, 0);
        assert_eq!(result.best_mean_score, 0.5);
    }

    #[test]
    fn zero_learning_rate_loses() {
        // Scores stand in for a constant predictor (R² ~ 0) vs a real fit.
        let grid = one_axis_grid(vec![ParamValue::Float(0.0), ParamValue::Float(0.1)]);
        let data = toy_matrix(10);
        let splits = kfold_splits(10, 5, 0, false).unwrap();
        let result = grid_search(&grid, &data, &splits, 0, |task| {
            let lr = task.assignment.f64("c").unwrap();
            Ok(FoldScore {
                r2_scaled: if lr == 0.0 { 0.0 } else { 0.9 },
                r2_raw: if lr == 0.0 { 0.0 } else { 0.9 },
            })
        })
        .unwrap();
        assert_eq!(result.best().assignment.f64("c"), Some(0.1));
    }

    #[test]
    fn counts_grid_times_k_fits() {
        let grid = ParamGrid {
            model: ModelKind::Svr,
            axes: vec![
                GridAxis {
                    name: "a".into(),
                    values: (0..4).map(ParamValue::Int).collect(),
                },
                GridAxis {
                    name: "b".into(),
                    values: (0..5).map(ParamValue::Int).collect(),
                },
            ],
        };
        assert_eq!(grid.combination_count(), 20);
        let data = toy_matrix(20);
        let splits = kfold_splits(20, 5, 0, false).unwrap();
        let fits = AtomicUsize::new(0);
        let result = grid_search(&grid, &data, &splits, 0, |_| {
            fits.fetch_add(1, Ordering::Relaxed);
            Ok(FoldScore {
                r2_scaled: 0.1,
                r2_raw: 0.1,
            })
        })
        .unwrap();
        assert_eq!(result.rows.len(), 20);
        assert_eq!(fits.load(Ordering::Relaxed), 100);
    }

    #[test]
    fn eighty_combo_grid_runs_four_hundred_fits() {
        let grid = ParamGrid {
            model: ModelKind::Svr,
            axes: vec![
                GridAxis {
                    name: "c".into(),
                    values: (0..4)
                        .map(|i| ParamValue::Float(10f64.powi(i - 1)))
                        .collect(),
                },
                GridAxis {
                    name: "gamma".into(),
                    values: (0..4)
                        .map(|i| ParamValue::Float(10f64.powi(-i - 1)))
                        .collect(),
                },
                GridAxis {
                    name: "epsilon".into(),
                    values: (0..5)
                        .map(|i| ParamValue::Float(0.01 * (i + 1) as f64))
                        .collect(),
                },
            ],
        };
        assert_eq!(grid.combination_count(), 80);
        let data = toy_matrix(25);
        let splits = kfold_splits(25, 5, 1, true).unwrap();
        let fits = AtomicUsize::new(0);
        let result = grid_search(&grid, &data, &splits, 1, |task| {
            fits.fetch_add(1, Ordering::Relaxed);
            Ok(FoldScore {
                r2_scaled: -task.assignment.f64("epsilon").unwrap(),
                r2_raw: 0.0,
            })
        })
        .unwrap();
        assert_eq!(result.rows.len(), 80);
        assert_eq!(fits.load(Ordering::Relaxed), 400);
    }

    #[test]
    fn tie_break_keeps_first_declared() {
        let grid = one_axis_grid(vec![
            ParamValue::Float(1.0),
            ParamValue::Float(2.0),
            ParamValue::Float(3.0),
        ]);
        let data = toy_matrix(6);
        let splits = kfold_splits(6, 2, 0, false).unwrap();
        let result = grid_search(&grid, &data, &splits, 0, |_| {
            Ok(FoldScore {
                r2_scaled: 0.7,
                r2_raw: 0.7,
            })
        })
        .unwrap();
        assert_eq!(result.best_index, 0);
    }

    #[test]
    fn axis_order_invariant_winner() {
        let data = toy_matrix(6);
        let splits = kfold_splits(6, 2, 0, false).unwrap();
        let score = |task: &FitTask| {
            let a = task.assignment.f64("a").unwrap();
            let b = task.assignment.f64("b").unwrap();
            Ok(FoldScore {
                r2_scaled: -((a - 2.0).powi(2) + (b - 7.0).powi(2)),
                r2_raw: 0.0,
            })
        };
        let axes_ab = vec![
            GridAxis {
                name: "a".into(),
                values: vec![ParamValue::Float(1.0), ParamValue::Float(2.0)],
            },
            GridAxis {
                name: "b".into(),
                values: vec![ParamValue::Float(5.0), ParamValue::Float(7.0)],
            },
        ];
        let mut axes_ba = axes_ab.clone();
        axes_ba.reverse();
        let r1 = grid_search(
            &ParamGrid {
                model: ModelKind::Svr,
                axes: axes_ab,
            },
            &data,
            &splits,
            0,
            score,
        )
        .unwrap();
        let r2 = grid_search(
            &ParamGrid {
                model: ModelKind::Svr,
                axes: axes_ba,
            },
            &data,
            &splits,
            0,
            score,
        )
        .unwrap();
        assert_eq!(r1.best().assignment.f64("a"), r2.best().assignment.f64("a"));
        assert_eq!(r1.best().assignment.f64("b"), r2.best().assignment.f64("b"));
    }

    #[test]
    fn all_failures_carry_table() {
        let grid = one_axis_grid(vec![ParamValue::Float(1.0), ParamValue::Float(2.0)]);
        let data = toy_matrix(6);
        let splits = kfold_splits(6, 2, 0, false).unwrap();
        let err = grid_search(&grid, &data, &splits, 0, |_| {
            Err(Error::Diverged { epoch: 3 })
        })
        .unwrap_err();
        match err {
            Error::AllConfigsFailed(table) => {
                assert_eq!(table.rows.len(), 2);
                assert!(table.rows.iter().all(|r| r.error.is_some()));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_export_shape() {
        let grid = one_axis_grid(vec![ParamValue::Float(1.0)]);
        let data = toy_matrix(10);
        let splits = kfold_splits(10, 5, 0, false).unwrap();
        let result = grid_search(&grid, &data, &splits, 0, |_| {
            Ok(FoldScore {
                r2_scaled: 0.5,
                r2_raw: 0.5,
            })
        })
        .unwrap();
        let csv = result.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("c,fold0_r2"));
        assert!(result.summary_string().contains("best config #0"));
    }
}
