//! Report files: forecast CSV, model-comparison metrics CSV, and an
//! actual-vs-predicted SVG chart.
//!
//! CSV headers are fixed interfaces:
//! `date,actual_cms,predicted_cms,step,alert` and `model,mse,rmse,mae,r2`.
//! The per-step table (multistep runs) adds `model,step,mae,mse,rmse,r2`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;

use super::pipeline::ForecastEntry;

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map_or("undefined".into(), |v| format!("{v}"))
}

/// Forecast rows in target-date order.
pub fn forecast_csv_string(entries: &[ForecastEntry]) -> String {
    let mut out = String::from("date,actual_cms,predicted_cms,step,alert\n");
    for e in entries {
        let actual = e.actual_cms.map_or(String::new(), |v| format!("{v}"));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.date, actual, e.predicted_cms, e.step, e.alert
        );
    }
    out
}

/// Model-comparison table, one row per model.
pub fn metrics_csv_string(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from("model,mse,rmse,mae,r2\n");
    for (model, m) in rows {
        let _ = writeln!(
            out,
            "{model},{},{},{},{}",
            m.mse,
            m.rmse,
            m.mae,
            fmt_r2(m.r2)
        );
    }
    out
}

/// Day-indexed per-step table for multistep runs.
pub fn step_metrics_csv_string(model: &str, rows: &[(usize, MetricsReport)]) -> String {
    let mut out = String::from("model,step,mae,mse,rmse,r2\n");
    for (step, m) in rows {
        let _ = writeln!(
            out,
            "{model},{step},{},{},{},{}",
            m.mae,
            m.mse,
            m.rmse,
            fmt_r2(m.r2)
        );
    }
    out
}

/// Files produced by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub forecast_csv: PathBuf,
    pub metrics_csv: PathBuf,
    pub chart_svg: PathBuf,
    pub step_metrics_csv: Option<PathBuf>,
}

/// Write the forecast CSV, the metrics table, and the chart into `out_dir`.
///
/// `step_metrics` adds the per-step table when the entries span a multi-day
/// horizon. Errors on empty results or an unwritable directory.
pub fn emit_report(
    entries: &[ForecastEntry],
    metrics: &[(String, MetricsReport)],
    step_metrics: Option<(&str, &[(usize, MetricsReport)])>,
    out_dir: &Path,
) -> Result<ReportFiles> {
    if entries.is_empty() {
        return Err(Error::EmptyResults);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let forecast_csv = out_dir.join("forecast.csv");
    write_file(&forecast_csv, &forecast_csv_string(entries))?;
    let metrics_csv = out_dir.join("metrics.csv");
    write_file(&metrics_csv, &metrics_csv_string(metrics))?;
    let chart_svg = out_dir.join("chart.svg");
    write_file(&chart_svg, &chart_svg_string(entries))?;
    let step_metrics_csv = match step_metrics {
        Some((model, rows)) if !rows.is_empty() => {
            let path = out_dir.join("step_metrics.csv");
            write_file(&path, &step_metrics_csv_string(model, rows))?;
            Some(path)
        }
        _ => None,
    };
    Ok(ReportFiles {
        forecast_csv,
        metrics_csv,
        chart_svg,
        step_metrics_csv,
    })
}

const CHART_W: f64 = 960.0;
const CHART_H: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Self-contained SVG line chart of actual vs predicted discharge
/// (step-1 entries), with axes and a legend.
pub fn chart_svg_string(entries: &[ForecastEntry]) -> String {
    let series: Vec<&ForecastEntry> = entries.iter().filter(|e| e.step == 1).collect();
    let n = series.len().max(1);
    let mut max_q = 1.0_f64;
    for e in &series {
        max_q = max_q.max(e.predicted_cms);
        if let Some(a) = e.actual_cms {
            max_q = max_q.max(a);
        }
    }
    let x_of = |i: usize| MARGIN + (CHART_W - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |q: f64| CHART_H - MARGIN - (CHART_H - 2.0 * MARGIN) * q / max_q;

    let polyline = |points: &[(usize, f64)]| {
        points
            .iter()
            .map(|(i, q)| format!("{:.2},{:.2}", x_of(*i), y_of(*q)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let actual_points: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.actual_cms.map(|a| (i, a)))
        .collect();
    let predicted_points: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.predicted_cms))
        .collect();

    let first_date = series.first().map_or(String::new(), |e| e.date.to_string());
    let last_date = series.last().map_or(String::new(), |e| e.date.to_string());

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_W}" height="{CHART_H}" viewBox="0 0 {CHART_W} {CHART_H}">
<rect width="100%" height="100%" fill="white"/>
<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>
<text x="{m}" y="{bl}" font-size="12">{first_date}</text>
<text x="{re}" y="{bl}" font-size="12" text-anchor="end">{last_date}</text>
<text x="8" y="{m}" font-size="12">{max_q:.0} m3/s</text>
<text x="8" y="{b}" font-size="12">0</text>
"#,
        m = MARGIN,
        b = CHART_H - MARGIN,
        bl = CHART_H - MARGIN + 16.0,
        r = CHART_W - MARGIN,
        re = CHART_W - MARGIN,
    );
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        polyline(&actual_points)
    );
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#d62728" stroke-width="1.5" points="{}"/>"##,
        polyline(&predicted_points)
    );
    let _ = write!(
        svg,
        r##"<rect x="{lx}" y="14" width="14" height="4" fill="#1f77b4"/>
<text x="{tx}" y="20" font-size="12">actual</text>
<rect x="{lx}" y="30" width="14" height="4" fill="#d62728"/>
<text x="{tx}" y="36" font-size="12">predicted</text>
</svg>
"##,
        lx = CHART_W - 150.0,
        tx = CHART_W - 130.0,
    );
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn entry(day: u32, step: usize, predicted: f64, actual: Option<f64>) -> ForecastEntry {
        ForecastEntry {
            date: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
            step,
            predicted_cms: predicted,
            actual_cms: actual,
            alert: "normal".into(),
            clamped: false,
            window_fingerprint: "abcd".into(),
        }
    }

    fn report() -> MetricsReport {
        MetricsReport {
            mae: 1.0,
            mse: 4.0,
            rmse: 2.0,
            r2: Some(0.9),
            n: 10,
        }
    }

    #[test]
    fn metrics_csv_layout() {
        let rows = vec![
            ("svr".to_string(), report()),
            ("lstm".to_string(), report()),
        ];
        let csv = metrics_csv_string(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,mse,rmse,mae,r2");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 5);
    }

    #[test]
    fn forecast_csv_layout() {
        let entries = vec![entry(1, 1, 100.0, Some(110.0)), entry(2, 1, 120.0, None)];
        let csv = forecast_csv_string(&entries);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "date,actual_cms,predicted_cms,step,alert");
        assert_eq!(lines[1], "2020-01-01,110,100,1,normal");
        assert_eq!(lines[2], "2020-01-02,,120,1,normal");
    }

    #[test]
    fn emit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            entry(1, 1, 100.0, Some(110.0)),
            entry(2, 1, 130.0, Some(90.0)),
        ];
        let metrics = vec![("gbt".to_string(), report())];
        let files = emit_report(&entries, &metrics, None, dir.path()).unwrap();
        assert!(files.forecast_csv.exists());
        assert!(files.metrics_csv.exists());
        assert!(files.chart_svg.exists());
        assert!(files.step_metrics_csv.is_none());
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_report(&[], &[], None, dir.path()),
            Err(Error::EmptyResults)
        ));
    }

    #[test]
    fn svg_contains_two_series_and_legend() {
        let entries = vec![
            entry(1, 1, 100.0, Some(110.0)),
            entry(2, 1, 150.0, Some(140.0)),
            entry(3, 1, 90.0, Some(95.0)),
        ];
        let svg = chart_svg_string(&entries);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">actual</text>"));
        assert!(svg.contains(">predicted</text>"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn step_metrics_table_written_for_multistep() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            entry(1, 1, 100.0, Some(110.0)),
            entry(2, 2, 120.0, Some(90.0)),
        ];
        let steps = vec![(1, report()), (2, report())];
        let files = emit_report(
            &entries,
            &[("lstm".to_string(), report())],
            Some(("lstm", &steps)),
            dir.path(),
        )
        .unwrap();
        let path = files.step_metrics_csv.unwrap();
        let content = std::fs::read_to_string(path).unwrap();
        assert!(content.starts_with("model,step,mae,mse,rmse,r2\n"));
        assert_eq!(content.lines().count(), 3);
    }
}
