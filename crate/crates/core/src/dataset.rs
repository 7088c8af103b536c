//! Ingestion of raw climate and discharge CSVs into an [`AlignedSeries`].
//!
//! Input files use ISO-8601 dates (`YYYY-MM-DD`); any other date format is
//! rejected. Rows that violate physical invariants (negative precipitation,
//! `t_min > t_max`, humidity outside `[0, 100]`, non-numeric discharge cells)
//! are rejected with a reason and counted in the [`QualityReport`], never
//! silently dropped. Duplicate dates keep the first occurrence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical name of the discharge column in an [`AlignedSeries`].
pub const DISCHARGE_COL: &str = "discharge_cms";

/// Column naming for a climate CSV. Defaults match the documented schema:
/// `date, precip_mm, tmin_c, tmax_c, rh_pct` plus optional extras.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateSchema {
    pub date: String,
    pub precip: String,
    pub t_min: String,
    pub t_max: String,
    pub rel_humidity: String,
    /// Extra numeric columns (e.g. absolute humidity) carried through verbatim.
    pub extras: Vec<String>,
}

impl Default for ClimateSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            precip: "precip_mm".into(),
            t_min: "tmin_c".into(),
            t_max: "tmax_c".into(),
            rel_humidity: "rh_pct".into(),
            extras: Vec::new(),
        }
    }
}

/// One day of climate drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateRecord {
    pub date: NaiveDate,
    /// Precipitation, mm/day. Non-negative.
    pub precip: f64,
    /// Daily minimum temperature, °C.
    pub t_min: f64,
    /// Daily maximum temperature, °C. `t_min <= t_max`.
    pub t_max: f64,
    /// Relative humidity, percent in `[0, 100]`.
    pub rel_humidity: f64,
    /// Values of the schema's extra columns, in schema order.
    pub extras: Vec<f64>,
}

/// One day of measured discharge at the gauging station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DischargeRecord {
    pub date: NaiveDate,
    /// Volumetric flow, m³/s. Non-negative and finite.
    pub discharge: f64,
}

/// Per-file cleaning outcome: what was kept, what was rejected and why.
///
/// Invariant: `accepted + rejected.len() + duplicates_removed` equals the
/// number of data rows in the source file. Outliers are flagged here but
/// never removed; robust scaling downweights them later.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QualityReport {
    pub accepted: usize,
    /// `(1-based data row number, reason)` for every rejected row.
    pub rejected: Vec<(usize, String)>,
    pub duplicates_removed: usize,
    /// Inclusive date ranges with no rows between the file's first and last date.
    pub gaps: Vec<(NaiveDate, NaiveDate)>,
    /// Accepted values beyond the 3·IQR fence, `(date, column)`.
    pub outliers: Vec<(NaiveDate, String)>,
}

impl QualityReport {
    /// Line-delimited `key=value` rendering, both human- and machine-readable.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "accepted={}", self.accepted);
        let _ = writeln!(out, "rejected={}", self.rejected.len());
        let _ = writeln!(out, "duplicates_removed={}", self.duplicates_removed);
        let _ = writeln!(out, "gaps={}", self.gaps.len());
        let _ = writeln!(out, "outliers={}", self.outliers.len());
        for (row, reason) in &self.rejected {
            let _ = writeln!(out, "rejected_row.{row}={reason}");
        }
        for (i, (start, end)) in self.gaps.iter().enumerate() {
            let _ = writeln!(out, "gap.{i}={start}..{end}");
        }
        for (i, (date, column)) in self.outliers.iter().enumerate() {
            let _ = writeln!(out, "outlier.{i}={date}:{column}");
        }
        out
    }

    /// Flag values beyond the Q3 + 3·IQR / Q1 − 3·IQR fences. Flagged rows
    /// stay in the data.
    fn scan_outliers(&mut self, column: &str, dated: &[(NaiveDate, f64)]) {
        if dated.len() < 4 {
            return;
        }
        let mut sorted: Vec<f64> = dated.iter().map(|(_, v)| *v).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        let q1 = quantile(0.25);
        let q3 = quantile(0.75);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 3.0 * iqr, q3 + 3.0 * iqr);
        for (date, v) in dated {
            if *v < lo || *v > hi {
                self.outliers.push((*date, column.to_string()));
            }
        }
    }

    fn scan_gaps(dates: &[NaiveDate]) -> Vec<(NaiveDate, NaiveDate)> {
        let mut gaps = Vec::new();
        for pair in dates.windows(2) {
            let missing = (pair[1] - pair[0]).num_days() - 1;
            if missing > 0 {
                gaps.push((
                    pair[0] + chrono::Duration::days(1),
                    pair[1] - chrono::Duration::days(1),
                ));
            }
        }
        gaps
    }
}

/// Date-indexed fused table of climate drivers and discharge.
///
/// Invariants: rows strictly increasing by date, no duplicate dates, every
/// row complete (one value per column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeries {
    pub dates: Vec<NaiveDate>,
    /// Column names; the last column is always [`DISCHARGE_COL`].
    pub columns: Vec<String>,
    /// Row-major values, `rows[i].len() == columns.len()`.
    pub rows: Vec<Vec<f64>>,
    /// Dates present in exactly one of the two inputs at merge time.
    pub gap_report: Vec<NaiveDate>,
}

impl AlignedSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// All values of one column, in row order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Row index of an exact date, if present.
    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Write as a CSV with header `date,<columns...>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        for (date, row) in self.dates.iter().zip(&self.rows) {
            let mut rec = vec![date.to_string()];
            rec.extend(row.iter().map(|v| format_float(*v)));
            w.write_record(&rec).map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }

    /// Read a series previously written by [`AlignedSeries::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = open_reader(path)?;
        let header = headers(&mut rdr, path)?;
        if header.first().map(String::as_str) != Some("date") {
            return Err(Error::SchemaColumnMissing {
                column: "date".into(),
                path: path.to_path_buf(),
            });
        }
        let columns: Vec<String> = header[1..].to_vec();
        if !columns.iter().any(|c| c == DISCHARGE_COL) {
            return Err(Error::SchemaColumnMissing {
                column: DISCHARGE_COL.into(),
                path: path.to_path_buf(),
            });
        }
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let date = parse_date(rec.get(0).unwrap_or_default()).ok_or_else(|| {
                Error::ZeroParseableRows {
                    path: path.to_path_buf(),
                }
            })?;
            let mut row = Vec::with_capacity(columns.len());
            for (i, column) in columns.iter().enumerate() {
                let cell = rec.get(i + 1).unwrap_or_default();
                let v: f64 = cell.trim().parse().map_err(|_| Error::NonFinite {
                    context: format!("{} column {column} at {date}", path.display()),
                })?;
                row.push(v);
            }
            dates.push(date);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::ZeroParseableRows {
                path: path.to_path_buf(),
            });
        }
        Ok(Self {
            dates,
            columns,
            rows,
            gap_report: Vec::new(),
        })
    }
}

/// Render floats compactly but losslessly (shortest round-trip form).
fn format_float(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json uses ryu internally; piggyback for shortest round-trip text.
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn headers(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect())
}

/// Strict ISO-8601 day parsing; anything else is rejected.
fn parse_date(cell: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(cell.trim(), "%Y-%m-%d").ok()
}

fn find_column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::SchemaColumnMissing {
            column: name.to_string(),
            path: path.to_path_buf(),
        })
}

/// Parse a numeric cell, rejecting embedded non-numeric characters
/// (e.g. `4@33`) rather than salvaging digits.
fn parse_numeric(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parse one climate CSV under `schema`.
///
/// Records come back sorted by date with duplicates removed (first kept);
/// every unparseable or invariant-violating row lands in the report.
pub fn parse_climate_csv(
    path: &Path,
    schema: &ClimateSchema,
) -> Result<(Vec<ClimateRecord>, QualityReport)> {
    let mut rdr = open_reader(path)?;
    let header = headers(&mut rdr, path)?;
    let date_ix = find_column(&header, &schema.date, path)?;
    let precip_ix = find_column(&header, &schema.precip, path)?;
    let tmin_ix = find_column(&header, &schema.t_min, path)?;
    let tmax_ix = find_column(&header, &schema.t_max, path)?;
    let rh_ix = find_column(&header, &schema.rel_humidity, path)?;
    let extra_ix: Vec<usize> = schema
        .extras
        .iter()
        .map(|c| find_column(&header, c, path))
        .collect::<Result<_>>()?;

    let mut report = QualityReport::default();
    let mut by_date: BTreeMap<NaiveDate, ClimateRecord> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(_) => {
                report.rejected.push((row_no, "malformed row".into()));
                continue;
            }
        };
        let cell = |ix: usize| rec.get(ix).unwrap_or_default();
        let Some(date) = parse_date(cell(date_ix)) else {
            report.rejected.push((row_no, "bad date".into()));
            continue;
        };
        let fields: Option<(f64, f64, f64, f64)> = (|| {
            Some((
                parse_numeric(cell(precip_ix))?,
                parse_numeric(cell(tmin_ix))?,
                parse_numeric(cell(tmax_ix))?,
                parse_numeric(cell(rh_ix))?,
            ))
        })();
        let Some((precip, t_min, t_max, rh)) = fields else {
            report.rejected.push((row_no, "special character".into()));
            continue;
        };
        let mut extras = Vec::with_capacity(extra_ix.len());
        let mut extras_ok = true;
        for &ix in &extra_ix {
            match parse_numeric(cell(ix)) {
                Some(v) => extras.push(v),
                None => {
                    extras_ok = false;
                    break;
                }
            }
        }
        if !extras_ok {
            report.rejected.push((row_no, "special character".into()));
            continue;
        }
        if t_min > t_max {
            report.rejected.push((row_no, "temperature order".into()));
            continue;
        }
        if precip < 0.0 {
            report
                .rejected
                .push((row_no, "negative precipitation".into()));
            continue;
        }
        if !(0.0..=100.0).contains(&rh) {
            report
                .rejected
                .push((row_no, "humidity out of range".into()));
            continue;
        }
        if by_date.contains_key(&date) {
            report.duplicates_removed += 1;
            continue;
        }
        by_date.insert(
            date,
            ClimateRecord {
                date,
                precip,
                t_min,
                t_max,
                rel_humidity: rh,
                extras,
            },
        );
    }
    if by_date.is_empty() {
        return Err(Error::ZeroParseableRows {
            path: path.to_path_buf(),
        });
    }
    report.accepted = by_date.len();
    let records: Vec<ClimateRecord> = by_date.into_values().collect();
    report.gaps = QualityReport::scan_gaps(&records.iter().map(|r| r.date).collect::<Vec<_>>());
    report.scan_outliers(
        &schema.precip,
        &records
            .iter()
            .map(|r| (r.date, r.precip))
            .collect::<Vec<_>>(),
    );
    Ok((records, report))
}

/// Parse a discharge CSV (`date,discharge_cms`).
///
/// Cells with embedded non-numeric characters are rejected with reason
/// "special character"; duplicate dates keep the first occurrence.
pub fn parse_discharge_csv(path: &Path) -> Result<(Vec<DischargeRecord>, QualityReport)> {
    let mut rdr = open_reader(path)?;
    let header = headers(&mut rdr, path)?;
    let date_ix = find_column(&header, "date", path)?;
    let q_ix = find_column(&header, DISCHARGE_COL, path)?;

    let mut report = QualityReport::default();
    let mut by_date: BTreeMap<NaiveDate, DischargeRecord> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(_) => {
                report.rejected.push((row_no, "malformed row".into()));
                continue;
            }
        };
        let Some(date) = parse_date(rec.get(date_ix).unwrap_or_default()) else {
            report.rejected.push((row_no, "bad date".into()));
            continue;
        };
        let Some(discharge) = parse_numeric(rec.get(q_ix).unwrap_or_default()) else {
            report.rejected.push((row_no, "special character".into()));
            continue;
        };
        if discharge < 0.0 {
            report.rejected.push((row_no, "negative discharge".into()));
            continue;
        }
        if by_date.contains_key(&date) {
            report.duplicates_removed += 1;
            continue;
        }
        by_date.insert(date, DischargeRecord { date, discharge });
    }
    if by_date.is_empty() {
        return Err(Error::ZeroParseableRows {
            path: path.to_path_buf(),
        });
    }
    report.accepted = by_date.len();
    let records: Vec<DischargeRecord> = by_date.into_values().collect();
    report.gaps = QualityReport::scan_gaps(&records.iter().map(|r| r.date).collect::<Vec<_>>());
    report.scan_outliers(
        DISCHARGE_COL,
        &records
            .iter()
            .map(|r| (r.date, r.discharge))
            .collect::<Vec<_>>(),
    );
    Ok((records, report))
}

/// Fuse several stations' records into one series by averaging same-date
/// values. A date contributes whenever at least one station reports it; the
/// mean runs over the stations that do.
pub fn average_stations(stations: &[Vec<ClimateRecord>]) -> Vec<ClimateRecord> {
    let mut by_date: BTreeMap<NaiveDate, (ClimateRecord, usize)> = BTreeMap::new();
    for station in stations {
        for rec in station {
            by_date
                .entry(rec.date)
                .and_modify(|(acc, n)| {
                    acc.precip += rec.precip;
                    acc.t_min += rec.t_min;
                    acc.t_max += rec.t_max;
                    acc.rel_humidity += rec.rel_humidity;
                    for (a, b) in acc.extras.iter_mut().zip(&rec.extras) {
                        *a += *b;
                    }
                    *n += 1;
                })
                .or_insert((rec.clone(), 1));
        }
    }
    by_date
        .into_values()
        .map(|(mut rec, n)| {
            let n = n as f64;
            rec.precip /= n;
            rec.t_min /= n;
            rec.t_max /= n;
            rec.rel_humidity /= n;
            for v in &mut rec.extras {
                *v /= n;
            }
            rec
        })
        .collect()
}

/// Inner-join climate and discharge on date.
///
/// Dates present in only one input are listed in `gap_report`. Errors when
/// the date sets do not intersect.
pub fn align_merge(
    climate: &[ClimateRecord],
    discharge: &[DischargeRecord],
    schema: &ClimateSchema,
) -> Result<AlignedSeries> {
    let q: BTreeMap<NaiveDate, f64> = discharge.iter().map(|r| (r.date, r.discharge)).collect();
    let c: BTreeMap<NaiveDate, &ClimateRecord> = climate.iter().map(|r| (r.date, r)).collect();

    let mut columns = vec![
        schema.precip.clone(),
        schema.t_min.clone(),
        schema.t_max.clone(),
        schema.rel_humidity.clone(),
    ];
    columns.extend(schema.extras.iter().cloned());
    columns.push(DISCHARGE_COL.to_string());

    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut gap_report = Vec::new();
    for (date, rec) in &c {
        match q.get(date) {
            Some(&discharge) => {
                let mut row = vec![rec.precip, rec.t_min, rec.t_max, rec.rel_humidity];
                row.extend(rec.extras.iter().copied());
                row.push(discharge);
                dates.push(*date);
                rows.push(row);
            }
            None => gap_report.push(*date),
        }
    }
    for date in q.keys() {
        if !c.contains_key(date) {
            gap_report.push(*date);
        }
    }
    gap_report.sort_unstable();
    if rows.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(AlignedSeries {
        dates,
        columns,
        rows,
        gap_report,
    })
}

/// Split into the first `floor(train_fraction * N)` rows and the remainder.
/// Order is preserved; nothing is shuffled.
pub fn temporal_split(
    series: &AlignedSeries,
    train_fraction: f64,
) -> Result<(AlignedSeries, AlignedSeries)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction(train_fraction));
    }
    let n = series.len();
    let boundary = (train_fraction * n as f64).floor() as usize;
    if boundary == 0 || boundary >= n {
        return Err(Error::SplitTooSmall {
            rows: n,
            fraction: train_fraction,
        });
    }
    let slice = |range: std::ops::Range<usize>| AlignedSeries {
        dates: series.dates[range.clone()].to_vec(),
        columns: series.columns.clone(),
        rows: series.rows[range].to_vec(),
        gap_report: Vec::new(),
    };
    Ok((slice(0..boundary), slice(boundary..n)))
}

/// Write a [`QualityReport`] to `path` in its `key=value` form.
pub fn write_quality_report(report: &QualityReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_kv_string()).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })
}
