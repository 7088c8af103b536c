//! End-to-end pipelines, alert classification, and report emission.

mod alert;
mod checkpoint;
mod pipeline;
mod report;

pub use alert::{classify_alert, AlertLevel, AlertThresholds};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use pipeline::{
    apply_assignment, assemble_features, default_grid, train_pipeline, tune_pipeline,
    EvaluationReport, ForecastEntry, PipelineConfig, Regime, TrainedModel, TrainedPipeline,
};
pub use report::{
    chart_svg_string, emit_report, forecast_csv_string, metrics_csv_string,
    step_metrics_csv_string, ReportFiles,
};
