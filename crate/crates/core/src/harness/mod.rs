//! Experiment runner: replicated pipelines, error metrics, rate fits and
//! CSV reports.

mod config;
mod metrics;
pub mod presets;
mod regression;
mod report;
mod run;

pub use config::{ExperimentConfig, InputKind, Metric};
pub use metrics::{eta, log_grid, CopulaTruth, TailTruth};
pub use presets::{run_preset, Fallback, PresetOutcome, PRESET_IDS};
pub use regression::{least_squares, median, quantile, rate_regression, RateFit};
pub use report::{emit_report, load_records, rerender, ReportFiles};
pub use run::{
    aggregate, estimate_copula, estimate_tail, run_experiment, run_replication, stream_index, ErrorRecord,
    ExperimentResult, Reference, Summary,
};
