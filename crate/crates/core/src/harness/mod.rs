//! The end-to-end active-learning loop, evaluation metrics, sweeps,
//! transfer runs and report files.

mod config;
mod experiment;
mod metrics;
mod report;
mod sweep;
mod transfer;

pub use config::{
    AugmentSettings, DataConfig, ExperimentConfig, Schedule, Strategy, SweepAxis, TrainSettings,
    DEFAULT_INIT_FRACTION, DEFAULT_MILESTONE_FRACTIONS,
};
pub use experiment::{
    compute_partitions, evaluate_model, evaluate_samples, fit_model, initial_pool, load_data, load_partitions, model_outputs,
    neighborhoods, run_experiment, run_plan, run_prepared, train_items, Evaluation, PreparedData, RunPlan,
};
pub use metrics::{instance_miou, mean_std, miou, pooled_standard_error, superpoint_posterior_variance, Miou};
pub use report::{Report, ReportRow, Summary, SummaryRow, REPORT_SCHEMA_VERSION};
pub use sweep::{sweep, sweep_label};
pub use transfer::{transfer, BASELINE_LABEL, TRANSFER_LABEL};
