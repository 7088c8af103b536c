//! Implementations of the six subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;

use hydrocast::dataset::{
    align_merge, average_stations, parse_climate_csv, parse_discharge_csv, temporal_split,
    write_quality_report, AlignedSeries, ClimateSchema, QualityReport,
};
use hydrocast::evaluation::{forward_chain_splits, kfold_splits, GridAxis, ParamGrid, ParamValue};
use hydrocast::forecast::{
    assemble_features, default_grid, emit_report, load_checkpoint, save_checkpoint, train_pipeline,
    tune_pipeline, Regime,
};
use hydrocast::synth::{generate_basin, BasinParams};

use crate::config::RunConfig;

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn summarize_report(label: &str, report: &QualityReport) {
    if !report.rejected.is_empty() || report.duplicates_removed > 0 {
        eprintln!(
            "{label}: {} accepted, {} rejected, {} duplicates removed, {} gaps",
            report.accepted,
            report.rejected.len(),
            report.duplicates_removed,
            report.gaps.len()
        );
        for (row, reason) in &report.rejected {
            eprintln!("{label}: rejected data row {row}: {reason}");
        }
    }
}

pub fn cmd_synth(params: BasinParams, out: &Path) -> anyhow::Result<()> {
    ensure_dir(out)?;
    let series = generate_basin(&params)?;
    let climate_path = out.join("climate.csv");
    let discharge_path = out.join("discharge.csv");

    let mut climate = String::from("date,precip_mm,tmin_c,tmax_c,rh_pct\n");
    let mut discharge = String::from("date,discharge_cms\n");
    let q_ix = series.column_index("discharge_cms")?;
    for (date, row) in series.dates.iter().zip(&series.rows) {
        let _ = writeln!(
            climate,
            "{date},{},{},{},{}",
            fmt(row[0]),
            fmt(row[1]),
            fmt(row[2]),
            fmt(row[3])
        );
        let _ = writeln!(discharge, "{date},{}", fmt(row[q_ix]));
    }
    std::fs::write(&climate_path, climate)?;
    std::fs::write(&discharge_path, discharge)?;
    println!("{}", climate_path.display());
    println!("{}", discharge_path.display());
    Ok(())
}

/// Shortest lossless float rendering (matches the aligned-CSV writer).
fn fmt(v: f64) -> String {
    let mut s = serde_json::to_string(&v).unwrap_or_else(|_| v.to_string());
    if s.ends_with(".0") {
        s.truncate(s.len() - 2);
    }
    s
}

pub struct IngestArgs {
    pub climate: Vec<PathBuf>,
    pub discharge: PathBuf,
    pub out: PathBuf,
    pub average_stations: bool,
    pub extra_columns: Vec<String>,
}

pub fn cmd_ingest(args: &IngestArgs) -> anyhow::Result<()> {
    if args.climate.is_empty() {
        bail!("at least one climate CSV is required");
    }
    if args.climate.len() > 1 && !args.average_stations {
        bail!("multiple climate files require station averaging (drop --no-average-stations)");
    }
    ensure_dir(&args.out)?;
    let schema = ClimateSchema {
        extras: args.extra_columns.clone(),
        ..Default::default()
    };

    let mut stations = Vec::new();
    for (i, path) in args.climate.iter().enumerate() {
        let (records, report) = parse_climate_csv(path, &schema)?;
        summarize_report(&format!("climate[{i}]"), &report);
        write_quality_report(&report, &args.out.join(format!("climate_quality_{i}.txt")))?;
        stations.push(records);
    }
    let climate = if stations.len() == 1 {
        stations.pop().unwrap()
    } else {
        average_stations(&stations)
    };

    let (discharge, q_report) = parse_discharge_csv(&args.discharge)?;
    summarize_report("discharge", &q_report);
    write_quality_report(&q_report, &args.out.join("discharge_quality.txt"))?;

    let series = align_merge(&climate, &discharge, &schema)?;
    if !series.gap_report.is_empty() {
        eprintln!(
            "alignment: {} dates present in only one source",
            series.gap_report.len()
        );
    }
    let aligned_path = args.out.join("aligned.csv");
    series.write_csv(&aligned_path)?;
    println!("{}", aligned_path.display());
    Ok(())
}

fn load_series(config: &RunConfig) -> anyhow::Result<AlignedSeries> {
    if let Some(path) = &config.data.aligned {
        return Ok(AlignedSeries::read_csv(path)?);
    }
    let discharge_path = config
        .data
        .discharge
        .as_ref()
        .context("config needs either data.aligned or data.climate + data.discharge")?;
    if config.data.climate.is_empty() {
        bail!("config needs at least one climate CSV under data.climate");
    }
    if config.data.climate.len() > 1 && !config.data.average_stations {
        bail!("multiple climate files require data.average_stations = true");
    }
    let schema = ClimateSchema {
        extras: config.data.extra_columns.clone(),
        ..Default::default()
    };
    let mut stations = Vec::new();
    for path in &config.data.climate {
        let (records, _) = parse_climate_csv(path, &schema)?;
        stations.push(records);
    }
    let climate = if stations.len() == 1 {
        stations.pop().unwrap()
    } else {
        average_stations(&stations)
    };
    let (discharge, _) = parse_discharge_csv(discharge_path)?;
    Ok(align_merge(&climate, &discharge, &schema)?)
}

pub fn cmd_train(config: &RunConfig) -> anyhow::Result<()> {
    let pipeline_config = config.pipeline_config()?;
    let series = load_series(config)?;
    let (train, _) = temporal_split(&series, config.data.train_fraction)?;
    let pipeline = train_pipeline(&pipeline_config, &train)?;
    ensure_dir(&config.output_dir)?;
    let checkpoint_path = config.output_dir.join("checkpoint.json");
    save_checkpoint(&pipeline, &checkpoint_path)?;
    if !pipeline.loss_history.is_empty() {
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in pipeline.loss_history.iter().enumerate() {
            let _ = writeln!(csv, "{epoch},{loss}");
        }
        std::fs::write(config.output_dir.join("loss_history.csv"), csv)?;
    }
    println!("{}", checkpoint_path.display());
    Ok(())
}

fn grid_from_config(config: &RunConfig) -> anyhow::Result<ParamGrid> {
    let model = config.model()?;
    if config.tune.grid.is_empty() {
        return Ok(default_grid(model));
    }
    let mut axes = Vec::new();
    for (name, value) in &config.tune.grid {
        let arr = value
            .as_array()
            .with_context(|| format!("tune.grid.{name} must be an array"))?;
        if arr.is_empty() {
            bail!("tune.grid.{name} must not be empty");
        }
        let values: Vec<ParamValue> = arr
            .iter()
            .map(|v| match v {
                toml::Value::Integer(n) => Ok(ParamValue::Int(*n)),
                toml::Value::Float(f) => Ok(ParamValue::Float(*f)),
                toml::Value::String(s) => Ok(ParamValue::Text(s.clone())),
                other => bail!("tune.grid.{name}: unsupported value {other}"),
            })
            .collect::<anyhow::Result<_>>()?;
        axes.push(GridAxis {
            name: name.clone(),
            values,
        });
    }
    Ok(ParamGrid { model, axes })
}

pub fn cmd_tune(config: &RunConfig) -> anyhow::Result<()> {
    let pipeline_config = config.pipeline_config()?;
    let series = load_series(config)?;
    let (train, _) = temporal_split(&series, config.data.train_fraction)?;
    let grid = grid_from_config(config)?;

    // Splits are over assembled samples, so count them first.
    let scaler = hydrocast::features::fit_robust_scaler(
        &train,
        &train.columns,
        pipeline_config.scaler_center,
    )?;
    let scaled = scaler.scale_series(&train)?;
    let n = assemble_features(&pipeline_config, &scaled)?.len();
    let splits = match config.tune.cv.as_str() {
        "kfold" => kfold_splits(n, config.tune.folds, config.seed, config.tune.shuffle)?,
        "forward_chain" => {
            let min_train = if config.tune.min_train == 0 {
                n / 2
            } else {
                config.tune.min_train
            };
            forward_chain_splits(n, config.tune.folds, min_train)?
        }
        other => bail!("unknown tune.cv '{other}' (expected kfold or forward_chain)"),
    };

    let (result, winner) = tune_pipeline(&pipeline_config, &grid, &train, &splits)?;
    ensure_dir(&config.output_dir)?;
    let table_path = config.output_dir.join("tune_results.csv");
    std::fs::write(&table_path, result.to_csv_string())?;

    // Full config with the winning values folded in, ready for `train`.
    let mut tuned = config.clone();
    apply_winner_to_run_config(&mut tuned, &winner);
    let tuned_path = config.output_dir.join("tuned_config.toml");
    std::fs::write(&tuned_path, toml::to_string_pretty(&tuned)?)?;

    println!("{}", result.summary_string());
    println!("{}", table_path.display());
    println!("{}", tuned_path.display());
    Ok(())
}

fn apply_winner_to_run_config(run: &mut RunConfig, winner: &hydrocast::forecast::PipelineConfig) {
    run.svr.c = winner.svr.c;
    run.svr.gamma = winner.svr.gamma;
    run.svr.epsilon = winner.svr.epsilon;
    run.gbt.n_estimators = winner.gbt.n_estimators;
    run.gbt.max_depth = winner.gbt.max_depth;
    run.gbt.learning_rate = winner.gbt.learning_rate;
    run.gbt.subsample = winner.gbt.subsample;
    run.gbt.colsample = winner.gbt.colsample;
    run.gbt.lambda = winner.gbt.lambda;
    run.neural.hidden = winner.hidden.clone();
    run.neural.learning_rate = winner.train.learning_rate;
    run.neural.batch_size = winner.train.batch_size;
    run.neural.epochs = winner.train.epochs;
    run.neural.optimizer = match winner.train.optimizer {
        hydrocast::models::neural::OptimizerKind::Sgd => "sgd".into(),
        hydrocast::models::neural::OptimizerKind::Adam => "adam".into(),
    };
}

pub struct EvaluateArgs {
    pub checkpoints: Vec<PathBuf>,
    pub data: PathBuf,
    pub out: PathBuf,
    /// `all`, `train`, or `test`; the latter two apply `train_fraction`.
    pub split: String,
    pub train_fraction: f64,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let series = AlignedSeries::read_csv(&args.data)?;
    let series = match args.split.as_str() {
        "all" => series,
        "train" => temporal_split(&series, args.train_fraction)?.0,
        "test" => temporal_split(&series, args.train_fraction)?.1,
        other => bail!("unknown split '{other}' (expected all, train or test)"),
    };
    ensure_dir(&args.out)?;
    let mut rows = Vec::new();
    let mut step_rows = None;
    for path in &args.checkpoints {
        let pipeline = load_checkpoint(path)?;
        let evaluation = pipeline.evaluate(&series)?;
        let model = pipeline.config.model.to_string();
        if pipeline.config.regime == Regime::SequenceMultistep {
            step_rows = Some((model.clone(), evaluation.per_step.clone()));
        }
        rows.push((model, evaluation.overall));
    }
    let csv = hydrocast::forecast::metrics_csv_string(&rows);
    let path = args.out.join("metrics.csv");
    std::fs::write(&path, &csv)?;
    print!("{csv}");
    if let Some((model, steps)) = step_rows {
        let csv = hydrocast::forecast::step_metrics_csv_string(&model, &steps);
        std::fs::write(args.out.join("step_metrics.csv"), &csv)?;
    }
    println!("{}", path.display());
    Ok(())
}

pub struct ForecastArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub date: Option<NaiveDate>,
    pub multistep: bool,
}

pub fn cmd_forecast(args: &ForecastArgs) -> anyhow::Result<()> {
    let pipeline = load_checkpoint(&args.checkpoint)?;
    let series = AlignedSeries::read_csv(&args.data)?;
    if args.multistep && pipeline.config.regime != Regime::SequenceMultistep {
        bail!(
            "--multistep requires a sequence_multistep checkpoint, this one is '{}'",
            pipeline.config.regime.as_str()
        );
    }
    let entries = match args.date {
        Some(date) => {
            if pipeline.config.regime == Regime::SequenceMultistep {
                pipeline.predict_multistep(&series, date)?
            } else {
                vec![pipeline.predict_daily(&series, date)?]
            }
        }
        None => pipeline.predict_series(&series)?,
    };

    let model = pipeline.config.model.to_string();
    let scored: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.actual_cms.map(|a| (a, e.predicted_cms)))
        .collect();
    let metrics = if scored.len() >= 2 {
        let (actual, predicted): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
        vec![(
            model.clone(),
            hydrocast::evaluation::MetricsReport::compute(&actual, &predicted)?,
        )]
    } else {
        Vec::new()
    };
    let files = emit_report(&entries, &metrics, None, &args.out)?;
    println!("{}", files.forecast_csv.display());
    println!("{}", files.chart_svg.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_lossless() {
        for v in [0.1, 433.0, 1.5e-7, 123456.789012345] {
            let s = fmt(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "render {v} as {s}");
        }
    }
}
